#pragma once

// Dense primal active-set solver for small strictly convex QPs:
//
//   minimize   0.5 x'Hx + c'x
//   subject to A x <= b
//
// H must be positive definite. The caller supplies a feasible start; the
// working set may be warm-started from a previous solve.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace mvp::qp {

struct Problem {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

struct Options {
  int max_iterations = 200;
  double feasibility_tol = 1e-9;
  double multiplier_tol = 1e-10;
  double step_tol = 1e-9;       // relative to 1 + |x|_inf
  double decrease_tol = 1e-15;  // relative to 1 + |objective|
};

enum class Status { kOptimal, kInfeasibleStart, kMaxIterations };

struct Result {
  Status status = Status::kOptimal;
  Eigen::VectorXd x;
  std::vector<int> active_set;
  Eigen::VectorXd multipliers;  // aligned with active_set
  int iterations = 0;
};

inline double objective(const Problem& p, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(p.H * x) + p.c.dot(x);
}

inline double max_violation(const Problem& p, const Eigen::VectorXd& x) {
  if (p.A.rows() == 0) return 0.0;
  return std::max(0.0, (p.A * x - p.b).maxCoeff());
}

namespace detail {

// Solves the equality-constrained step
//   [H  Aw'] [s ]   [-g]
//   [Aw  0 ] [mu] = [ 0]
inline void solve_kkt(const Problem& p, const std::vector<int>& working, const Eigen::VectorXd& g,
                      Eigen::VectorXd& step, Eigen::VectorXd& mu) {
  const auto n = p.H.rows();
  const auto w = static_cast<Eigen::Index>(working.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + w, n + w);
  kkt.topLeftCorner(n, n) = p.H;
  for (Eigen::Index k = 0; k < w; ++k) {
    kkt.block(n + k, 0, 1, n) = p.A.row(working[k]);
    kkt.block(0, n + k, n, 1) = p.A.row(working[k]).transpose();
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + w);
  rhs.head(n) = -g;
  const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
  step = sol.head(n);
  mu = sol.tail(w);
}

inline bool independent_of(const Problem& p, const std::vector<int>& working, int candidate) {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(working.size()) + 1, p.A.cols());
  for (std::size_t k = 0; k < working.size(); ++k) rows.row(static_cast<Eigen::Index>(k)) = p.A.row(working[k]);
  rows.row(rows.rows() - 1) = p.A.row(candidate);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
  lu.setThreshold(1e-10);
  return lu.rank() == rows.rows();
}

}  // namespace detail

inline Result solve(const Problem& p, const Eigen::VectorXd& x0, std::span<const int> warm_working_set = {},
                    const Options& opt = {}) {
  Result r;
  r.x = x0;
  if (max_violation(p, x0) > opt.feasibility_tol) {
    r.status = Status::kInfeasibleStart;
    return r;
  }

  // Keep only hinted constraints that are active at the start point.
  std::vector<int> working;
  for (int i : warm_working_set) {
    if (i < 0 || i >= p.A.rows()) continue;
    if (std::find(working.begin(), working.end(), i) != working.end()) continue;
    if (std::abs(p.A.row(i).dot(x0) - p.b(i)) > opt.feasibility_tol) continue;
    if (static_cast<Eigen::Index>(working.size()) >= p.H.rows()) break;
    if (detail::independent_of(p, working, i)) working.push_back(i);
  }

  Eigen::VectorXd& x = r.x;
  Eigen::VectorXd step, mu;
  for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
    const Eigen::VectorXd g = p.H * x + p.c;
    detail::solve_kkt(p, working, g, step, mu);

    // Nearly singular H leaves round-off steps along its flat directions that
    // never shrink to zero; treat a step as null when it is tiny or when it
    // would not lower the objective measurably.
    const double scale = 1.0 + x.lpNorm<Eigen::Infinity>();
    const double decrease = -(g.dot(step) + 0.5 * step.dot(p.H * step));
    const bool stationary = step.lpNorm<Eigen::Infinity>() <= opt.step_tol * scale ||
                            decrease <= opt.decrease_tol * (1.0 + std::abs(objective(p, x)));
    if (stationary) {
      Eigen::Index drop = -1;
      double most_negative = -opt.multiplier_tol;
      for (Eigen::Index k = 0; k < mu.size(); ++k) {
        if (mu(k) < most_negative) {
          most_negative = mu(k);
          drop = k;
        }
      }
      if (drop < 0) {
        r.active_set = working;
        r.multipliers = mu;
        r.status = Status::kOptimal;
        return r;
      }
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (Eigen::Index i = 0; i < p.A.rows(); ++i) {
      if (std::find(working.begin(), working.end(), static_cast<int>(i)) != working.end()) continue;
      const double ap = p.A.row(i).dot(step);
      if (ap <= 1e-14) continue;
      const double limit = std::max(0.0, (p.b(i) - p.A.row(i).dot(x)) / ap);
      if (limit < alpha) {
        alpha = limit;
        blocking = static_cast<int>(i);
      }
    }
    x += alpha * step;
    if (blocking >= 0) working.push_back(blocking);
  }

  r.status = Status::kMaxIterations;
  r.active_set = working;
  return r;
}

}  // namespace mvp::qp
