#pragma once

// Dense active-set solver for the small strictly convex QP
//
//   minimize   (x - x_goal)^T diag(weights) (x - x_goal)
//   subject to A x <= b
//
// used by the planner for reference selection and by the geometry module for
// point-to-polyhedron distances.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace stemnav::qp {

struct Problem {
  Eigen::VectorXd weights;  ///< diagonal Hessian entries, all > 0
  Eigen::VectorXd goal;
  Eigen::MatrixXd A;        ///< p x n; p may be zero
  Eigen::VectorXd b;
};

enum class Status { optimal, infeasible };

struct Options {
  /// Feasibility tolerance on unit-normalized rows in the weighted metric.
  double feasibility_tol = 1e-10;
  int max_iterations = 10000;
};

struct Result {
  Status status = Status::infeasible;
  Eigen::VectorXd x;            ///< empty when infeasible
  Eigen::VectorXd multipliers;  ///< one per row of A, >= 0; zero for inactive rows
  std::vector<int> active;      ///< rows in the final active set, ascending
  double residual = 0.0;        ///< max(A x - b), or 0 without rows
  int iterations = 0;

  bool ok() const { return status == Status::optimal; }
};

/// Throws std::invalid_argument on malformed problems (dimension mismatch,
/// non-positive weights, non-finite data).
Result solve(const Problem& problem, const Options& options = {});

struct Projection {
  Eigen::VectorXd point;
  double distance = 0.0;
};

/// Euclidean projection onto {x : A x <= b}; nullopt when the set is empty.
std::optional<Projection> project(const Eigen::VectorXd& point, const Eigen::MatrixXd& A,
                                  const Eigen::VectorXd& b);

inline double cost(const Problem& problem, const Eigen::VectorXd& x) {
  const Eigen::VectorXd d = x - problem.goal;
  return d.dot(problem.weights.cwiseProduct(d));
}

}  // namespace stemnav::qp
