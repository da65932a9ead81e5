#pragma once

#include "mtlsynth/milp/backend.hpp"
#include "mtlsynth/milp/lp_format.hpp"
#include "mtlsynth/milp/model.hpp"
#include "mtlsynth/milp/simplex.hpp"
#include "mtlsynth/milp/solve.hpp"
