#pragma once

#include <memory>
#include <string>

#include "mtlsynth/milp/model.hpp"
#include "mtlsynth/milp/solve.hpp"

namespace mtlsynth::milp {

/// Seam for substituting an external MILP solver: load a model, solve it
/// against a deadline, read the solution back.
class SolverBackend {
public:
  virtual ~SolverBackend() = default;
  virtual std::string name() const = 0;
  virtual void load(Model& model) = 0;
  virtual Solution solve(Deadline deadline) = 0;
};

/// The built-in simplex + branch-and-bound solver.
class BuiltinBackend final : public SolverBackend {
public:
  explicit BuiltinBackend(MilpOptions options = {}) : options_(options) {}

  std::string name() const override { return "builtin"; }
  void load(Model& model) override { model_ = &model; }
  Solution solve(Deadline deadline) override {
    if (!model_) throw ModelError("no model loaded");
    return solve_milp(*model_, deadline, options_);
  }

private:
  MilpOptions options_;
  Model* model_ = nullptr;
};

inline std::unique_ptr<SolverBackend> make_default_backend() { return std::make_unique<BuiltinBackend>(); }

}  // namespace mtlsynth::milp
