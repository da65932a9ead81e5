#pragma once

// Bounded-variable dual simplex over the active rows of a Model.
//
// Working form: A x - r = 0 with l <= x <= u for structurals and
// lo_i <= r_i <= hi_i for row activities (logicals). Infinite bounds are
// replaced by artificial ones so every nonbasic variable sits at a finite
// bound and any basis can be made dual feasible by bound placement; a
// solution resting on an artificial bound is reported as unbounded.

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "mtlsynth/milp/model.hpp"

namespace mtlsynth::milp {

enum class LpStatus { Optimal, Infeasible, Unbounded, Deadline, Numerical };

struct SimplexOptions {
  double primal_tol = 1e-9;
  double dual_tol = 1e-9;
  double pivot_tol = 1e-9;
  double artificial_bound = 1e7;
  int refactor_interval = 64;
  /// Consecutive degenerate iterations before switching to Bland's rule.
  int degenerate_limit = 50;
};

/// LU factors of a basis matrix plus a product-form file of pivot updates.
class BasisFactor {
public:
  /// Factors the m x m matrix given column by column; false when singular.
  bool factor(int m, const std::vector<std::vector<std::pair<int, double>>>& columns) {
    m_ = m;
    etas_.clear();
    if (m == 0) return true;
    std::vector<Eigen::Triplet<double>> trips;
    for (int c = 0; c < m; ++c) {
      for (const auto& [i, a] : columns[static_cast<std::size_t>(c)]) trips.emplace_back(i, c, a);
    }
    Eigen::SparseMatrix<double> b(m, m);
    b.setFromTriplets(trips.begin(), trips.end());
    b.makeCompressed();
    lu_.analyzePattern(b);
    lu_.factorize(b);
    if (lu_.info() != Eigen::Success) return false;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
    const Eigen::VectorXd back = lu_.solve(b * ones);
    return (back - ones).cwiseAbs().maxCoeff() < 1e-6;
  }

  /// v <- B^-1 v
  void ftran(Eigen::VectorXd& v) const {
    if (m_ == 0) return;
    v = lu_.solve(v).eval();
    for (const auto& e : etas_) {
      const double xr = v(e.r) / e.pivot;
      v(e.r) = xr;
      if (xr == 0.0) continue;
      for (const auto& [i, w] : e.entries) v(i) -= w * xr;
    }
  }

  /// v <- B^-T v
  void btran(Eigen::VectorXd& v) const {
    if (m_ == 0) return;
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      double s = v(it->r);
      for (const auto& [i, w] : it->entries) s -= v(i) * w;
      v(it->r) = s / it->pivot;
    }
    v = lu_.transpose().solve(v).eval();
  }

  /// Records the replacement of basis position r by a column with B^-1 a = w.
  void update(int r, const Eigen::VectorXd& w) {
    Eta e;
    e.r = r;
    e.pivot = w(r);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (i != r && w(i) != 0.0) e.entries.emplace_back(static_cast<int>(i), w(i));
    }
    etas_.push_back(std::move(e));
  }

  int updates() const { return static_cast<int>(etas_.size()); }

private:
  struct Eta {
    int r = 0;
    double pivot = 1.0;
    std::vector<std::pair<int, double>> entries;
  };

  int m_ = 0;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu_;
  std::vector<Eta> etas_;
};

class LpEngine {
public:
  explicit LpEngine(const Model& model, SimplexOptions options = {}) : opt_(options) {
    n_ = model.num_variables();
    for (int i = 0; i < model.num_rows(); ++i) {
      if (model.row(i).active) row_map_.push_back(i);
    }
    m_ = static_cast<int>(row_map_.size());
    cols_.assign(static_cast<std::size_t>(n_), {});
    for (int i = 0; i < m_; ++i) {
      for (const auto& t : model.row(row_map_[static_cast<std::size_t>(i)]).terms) {
        cols_[static_cast<std::size_t>(t.var)].push_back({i, t.coef});
      }
    }
    const int total = n_ + m_;
    cost_.assign(static_cast<std::size_t>(total), 0.0);
    lb_.resize(static_cast<std::size_t>(total));
    ub_.resize(static_cast<std::size_t>(total));
    for (int j = 0; j < n_; ++j) {
      cost_[idx(j)] = model.objective()[idx(j)];
      lb_[idx(j)] = model.variable(j).lower;
      ub_[idx(j)] = model.variable(j).upper;
    }
    for (int i = 0; i < m_; ++i) {
      const Row& r = model.row(row_map_[static_cast<std::size_t>(i)]);
      lb_[idx(n_ + i)] = r.lower();
      ub_[idx(n_ + i)] = r.upper();
    }
    base_lb_ = lb_;
    base_ub_ = ub_;
    status_.assign(static_cast<std::size_t>(total), BasisStatus::AtLower);
    x_.assign(static_cast<std::size_t>(total), 0.0);
    d_.assign(static_cast<std::size_t>(total), 0.0);
    alpha_.assign(static_cast<std::size_t>(total), 0.0);
    head_.resize(static_cast<std::size_t>(m_));
    slack_basis();
  }

  int rows() const { return m_; }
  int structurals() const { return n_; }

  /// Overrides structural bounds (branch-and-bound); restores with reset_bounds().
  void set_bounds(int var, double lower, double upper) {
    lb_[idx(var)] = lower;
    ub_[idx(var)] = upper;
    bounds_dirty_ = true;
  }

  void reset_bounds() {
    lb_ = base_lb_;
    ub_ = base_ub_;
    bounds_dirty_ = true;
  }

  double lower(int var) const { return lb_[idx(var)]; }
  double upper(int var) const { return ub_[idx(var)]; }

  void slack_basis() {
    for (int j = 0; j < n_; ++j) status_[idx(j)] = BasisStatus::AtLower;
    for (int i = 0; i < m_; ++i) {
      head_[idx(i)] = n_ + i;
      status_[idx(n_ + i)] = BasisStatus::Basic;
    }
    std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) cols[idx(i)] = {{i, -1.0}};
    factor_.factor(m_, cols);
    recompute_duals();
    place_nonbasic();
    recompute_primal();
    since_refactor_ = 0;
  }

  /// Warm start from a basis keyed by model ids. Falls back to the slack basis
  /// (returning false) when the basis does not fit the active rows or is singular.
  bool load_basis(const Basis& basis) {
    std::vector<int> head;
    for (int j = 0; j < n_; ++j) {
      const auto s = j < static_cast<int>(basis.vars.size()) ? basis.vars[idx(j)] : BasisStatus::AtLower;
      status_[idx(j)] = s;
      if (s == BasisStatus::Basic) head.push_back(j);
    }
    for (int i = 0; i < m_; ++i) {
      const int rid = row_map_[idx(i)];
      const auto s = rid < static_cast<int>(basis.rows.size()) ? basis.rows[idx(rid)] : BasisStatus::Basic;
      status_[idx(n_ + i)] = s;
      if (s == BasisStatus::Basic) head.push_back(n_ + i);
    }
    if (static_cast<int>(head.size()) != m_) {
      slack_basis();
      return false;
    }
    head_ = std::move(head);
    if (!refactor()) {
      slack_basis();
      return false;
    }
    return true;
  }

  Basis basis(const Model& model) const {
    Basis b;
    b.vars.assign(status_.begin(), status_.begin() + n_);
    b.rows.assign(static_cast<std::size_t>(model.num_rows()), BasisStatus::Basic);
    for (int i = 0; i < m_; ++i) b.rows[idx(row_map_[idx(i)])] = status_[idx(n_ + i)];
    return b;
  }

  LpStatus solve(const Deadline& deadline) {
    if (bounds_dirty_) {
      for (int j = 0; j < n_ + m_; ++j) {
        if (lb_[idx(j)] > ub_[idx(j)]) return LpStatus::Infeasible;
      }
      place_nonbasic();
      recompute_primal();
      bounds_dirty_ = false;
    }
    const long limit = 50L * (n_ + m_) + 1000;
    int degenerate = 0;
    bool bland = false;
    int verify_rounds = 0;
    for (long iter = 0;; ++iter) {
      if (iter > limit) return LpStatus::Numerical;
      deadline.charge();
      if (deadline.work_exhausted() || ((iter & 15) == 0 && deadline.wall_expired())) return LpStatus::Deadline;
      if (since_refactor_ >= opt_.refactor_interval) {
        if (!refactor()) return LpStatus::Numerical;
      }
      const int r = choose_leaving(bland);
      if (r < 0) {
        // Finish from a fresh factorization in canonical column order so the
        // reported point depends only on the final basis.
        if ((since_refactor_ > 0 || !std::is_sorted(head_.begin(), head_.end())) && verify_rounds < 3) {
          ++verify_rounds;
          std::sort(head_.begin(), head_.end());
          if (!refactor()) return LpStatus::Numerical;
          continue;
        }
        return on_bound_artificial() ? LpStatus::Unbounded : LpStatus::Optimal;
      }
      const PivotResult pr = pivot(r, bland);
      if (pr == PivotResult::Infeasible) return LpStatus::Infeasible;
      if (pr == PivotResult::Retry) {
        if (!refactor()) return LpStatus::Numerical;
        continue;
      }
      ++iterations_;
      if (pr == PivotResult::Degenerate) {
        if (++degenerate > opt_.degenerate_limit) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }
    }
  }

  long iterations() const { return iterations_; }

  double objective() const {
    double v = 0.0;
    for (int j = 0; j < n_; ++j) v += cost_[idx(j)] * x_[idx(j)];
    return v;
  }

  std::vector<double> primal() const { return {x_.begin(), x_.begin() + n_}; }

  /// Row duals indexed by model row id.
  std::vector<double> row_duals(int model_rows) const {
    std::vector<double> y(static_cast<std::size_t>(model_rows), 0.0);
    for (int i = 0; i < m_; ++i) y[idx(row_map_[idx(i)])] = d_[idx(n_ + i)];
    return y;
  }

private:
  enum class PivotResult { Progress, Degenerate, Infeasible, Retry };

  static std::size_t idx(int i) { return static_cast<std::size_t>(i); }

  double work_lb(int j) const {
    const double l = lb_[idx(j)];
    return std::isfinite(l) ? l : -opt_.artificial_bound;
  }
  double work_ub(int j) const {
    const double u = ub_[idx(j)];
    return std::isfinite(u) ? u : opt_.artificial_bound;
  }

  /// rho . M_j
  double column_dot(const Eigen::Ref<const Eigen::VectorXd>& rho, int j) const {
    if (j >= n_) return -rho(j - n_);
    double s = 0.0;
    for (const auto& [i, a] : cols_[idx(j)]) s += rho(i) * a;
    return s;
  }

  /// B^-1 M_j
  Eigen::VectorXd binv_column(int j) const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m_);
    if (j >= n_) {
      w(j - n_) = -1.0;
    } else {
      for (const auto& [i, a] : cols_[idx(j)]) w(i) += a;
    }
    factor_.ftran(w);
    return w;
  }

  bool refactor() {
    std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(m_));
    for (int r = 0; r < m_; ++r) {
      const int j = head_[idx(r)];
      if (j >= n_) {
        cols[idx(r)] = {{j - n_, -1.0}};
      } else {
        cols[idx(r)] = cols_[idx(j)];
      }
    }
    if (!factor_.factor(m_, cols)) return false;
    since_refactor_ = 0;
    recompute_duals();
    place_nonbasic();
    recompute_primal();
    return true;
  }

  void recompute_duals() {
    Eigen::VectorXd cb(m_);
    for (int r = 0; r < m_; ++r) cb(r) = cost_[idx(head_[idx(r)])];
    Eigen::VectorXd y = cb;
    factor_.btran(y);
    for (int j = 0; j < n_ + m_; ++j) {
      d_[idx(j)] = status_[idx(j)] == BasisStatus::Basic ? 0.0 : cost_[idx(j)] - column_dot(y, j);
    }
  }

  /// Puts every nonbasic variable on the bound its reduced cost asks for.
  void place_nonbasic() {
    for (int j = 0; j < n_ + m_; ++j) {
      auto& s = status_[idx(j)];
      if (s == BasisStatus::Basic) continue;
      const double l = lb_[idx(j)];
      const double u = ub_[idx(j)];
      const double dj = d_[idx(j)];
      if (l == u) {
        s = BasisStatus::AtLower;
      } else if (dj > opt_.dual_tol) {
        s = BasisStatus::AtLower;
      } else if (dj < -opt_.dual_tol) {
        s = BasisStatus::AtUpper;
      } else if (s == BasisStatus::AtLower && std::isfinite(l)) {
      } else if (s == BasisStatus::AtUpper && std::isfinite(u)) {
      } else if (std::isfinite(l)) {
        s = BasisStatus::AtLower;
      } else if (std::isfinite(u)) {
        s = BasisStatus::AtUpper;
      } else {
        s = BasisStatus::AtZero;
      }
      x_[idx(j)] = s == BasisStatus::AtLower ? work_lb(j) : s == BasisStatus::AtUpper ? work_ub(j) : 0.0;
    }
  }

  void recompute_primal() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < n_ + m_; ++j) {
      if (status_[idx(j)] == BasisStatus::Basic) continue;
      const double v = x_[idx(j)];
      if (v == 0.0) continue;
      if (j >= n_) {
        rhs(j - n_) += v;
      } else {
        for (const auto& [i, a] : cols_[idx(j)]) rhs(i) -= a * v;
      }
    }
    Eigen::VectorXd xb = rhs;
    factor_.ftran(xb);
    for (int r = 0; r < m_; ++r) x_[idx(head_[idx(r)])] = xb(r);
  }

  int choose_leaving(bool bland) const {
    int best = -1;
    double best_infeas = 0.0;
    int best_var = 0;
    for (int r = 0; r < m_; ++r) {
      const int j = head_[idx(r)];
      const double v = x_[idx(j)];
      double infeas = 0.0;
      const double l = work_lb(j);
      const double u = work_ub(j);
      if (v < l - opt_.primal_tol * (1.0 + std::abs(l))) infeas = l - v;
      else if (v > u + opt_.primal_tol * (1.0 + std::abs(u))) infeas = v - u;
      if (infeas <= 0.0) continue;
      if (bland) {
        if (best < 0 || j < best_var) {
          best = r;
          best_var = j;
        }
      } else if (infeas > best_infeas) {
        best = r;
        best_infeas = infeas;
      }
    }
    return best;
  }

  PivotResult pivot(int r, bool bland) {
    const int leaving = head_[idx(r)];
    const double v = x_[idx(leaving)];
    const bool increase = v < work_lb(leaving);
    const double target = increase ? work_lb(leaving) : work_ub(leaving);
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(m_);
    rho(r) = 1.0;
    factor_.btran(rho);

    // Harris two-pass ratio test over nonbasic columns.
    double theta_max = INFINITY;
    for (int j = 0; j < n_ + m_; ++j) {
      const auto s = status_[idx(j)];
      if (s == BasisStatus::Basic || lb_[idx(j)] == ub_[idx(j)]) {
        alpha_[idx(j)] = 0.0;
        continue;
      }
      const double a = column_dot(rho, j);
      alpha_[idx(j)] = a;
      if (!eligible(s, a, increase)) continue;
      const double ratio = bland ? std::abs(d_[idx(j)]) / std::abs(a)
                                 : (std::abs(d_[idx(j)]) + opt_.dual_tol) / std::abs(a);
      theta_max = std::min(theta_max, ratio);
    }
    if (!std::isfinite(theta_max)) return PivotResult::Infeasible;
    int q = -1;
    double best_alpha = 0.0;
    for (int j = 0; j < n_ + m_; ++j) {
      const auto s = status_[idx(j)];
      if (s == BasisStatus::Basic || lb_[idx(j)] == ub_[idx(j)]) continue;
      const double a = alpha_[idx(j)];
      if (!eligible(s, a, increase)) continue;
      const double ratio = std::abs(d_[idx(j)]) / std::abs(a);
      if (ratio > theta_max) continue;
      if (bland) {
        if (q < 0) q = j;
      } else if (std::abs(a) > best_alpha) {
        best_alpha = std::abs(a);
        q = j;
      }
    }
    if (q < 0) return PivotResult::Infeasible;

    const double alpha_q = alpha_[idx(q)];
    const Eigen::VectorXd w = binv_column(q);
    if (std::abs(w(r) - alpha_q) > 1e-7 * (1.0 + std::abs(alpha_q))) return PivotResult::Retry;

    // Dual update.
    const double theta_d = d_[idx(q)] / alpha_q;
    for (int j = 0; j < n_ + m_; ++j) {
      if (status_[idx(j)] != BasisStatus::Basic) d_[idx(j)] -= theta_d * alpha_[idx(j)];
    }
    d_[idx(q)] = 0.0;
    d_[idx(leaving)] = -theta_d;

    // Primal update.
    const double delta = (v - target) / alpha_q;
    for (int i = 0; i < m_; ++i) x_[idx(head_[idx(i)])] -= w(i) * delta;
    x_[idx(q)] += delta;
    x_[idx(leaving)] = target;
    status_[idx(leaving)] = increase ? BasisStatus::AtLower : BasisStatus::AtUpper;
    if (lb_[idx(leaving)] == ub_[idx(leaving)]) status_[idx(leaving)] = BasisStatus::AtLower;
    status_[idx(q)] = BasisStatus::Basic;
    head_[idx(r)] = q;

    factor_.update(r, w);
    ++since_refactor_;
    return std::abs(theta_d) < 1e-12 ? PivotResult::Degenerate : PivotResult::Progress;
  }

  bool eligible(BasisStatus s, double a, bool increase) const {
    if (std::abs(a) <= opt_.pivot_tol) return false;
    if (s == BasisStatus::AtZero) return true;
    // x_B(r) moves by -a per unit increase of x_j.
    const bool j_increases = s == BasisStatus::AtLower;
    return increase ? (j_increases ? a < 0.0 : a > 0.0) : (j_increases ? a > 0.0 : a < 0.0);
  }

  bool on_bound_artificial() const {
    for (int j = 0; j < n_ + m_; ++j) {
      const auto s = status_[idx(j)];
      if (s == BasisStatus::AtLower && !std::isfinite(lb_[idx(j)])) return true;
      if (s == BasisStatus::AtUpper && !std::isfinite(ub_[idx(j)])) return true;
      if (s == BasisStatus::Basic && std::abs(x_[idx(j)]) >= 0.5 * opt_.artificial_bound) return true;
    }
    return false;
  }

  SimplexOptions opt_;
  int n_ = 0;
  int m_ = 0;
  std::vector<int> row_map_;
  std::vector<std::vector<std::pair<int, double>>> cols_;
  std::vector<double> cost_, lb_, ub_, base_lb_, base_ub_;
  std::vector<BasisStatus> status_;
  std::vector<double> x_, d_, alpha_;
  std::vector<int> head_;
  BasisFactor factor_;
  int since_refactor_ = 0;
  long iterations_ = 0;
  bool bounds_dirty_ = false;
};

}  // namespace mtlsynth::milp
