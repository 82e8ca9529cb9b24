#include "stemnav/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stemnav::qp {

namespace {

void validate(const Problem& p) {
  const auto n = p.goal.size();
  if (p.weights.size() != n) throw std::invalid_argument("qp: weights/goal size mismatch");
  if (p.A.rows() != p.b.size()) throw std::invalid_argument("qp: A/b row mismatch");
  if (p.A.rows() > 0 && p.A.cols() != n) throw std::invalid_argument("qp: A column mismatch");
  if (!p.goal.allFinite() || !p.A.allFinite() || !p.b.allFinite())
    throw std::invalid_argument("qp: non-finite data");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(p.weights[i] > 0.0) || !std::isfinite(p.weights[i]))
      throw std::invalid_argument("qp: weights must be positive");
}

constexpr double kDependenceTol = 1e-13;
constexpr double kRatioTol = 1e-14;

}  // namespace

// Goldfarb-Idnani dual active-set iteration in the whitened variable
// y = W^{1/2} (x - goal), where the problem becomes the projection of the
// origin onto {y : C y <= e}. Rows of C are normalized to unit length.
Result solve(const Problem& problem, const Options& options) {
  validate(problem);
  const auto n = problem.goal.size();
  const auto rows = problem.A.rows();

  const Eigen::VectorXd sqrt_w = problem.weights.cwiseSqrt();
  Eigen::MatrixXd C(rows, n);
  Eigen::VectorXd e(rows);
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(rows);
  std::vector<bool> usable(static_cast<std::size_t>(rows), false);

  Result result;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd c = problem.A.row(i).transpose().cwiseQuotient(sqrt_w);
    const double rhs = problem.b[i] - problem.A.row(i).dot(problem.goal);
    const double norm = c.norm();
    if (norm < 1e-300) {
      // 0 <= rhs: vacuous or contradictory regardless of x.
      if (rhs < -options.feasibility_tol) return result;
      C.row(i).setZero();
      e[i] = 0.0;
      continue;
    }
    C.row(i) = c.transpose() / norm;
    e[i] = rhs / norm;
    scale[i] = norm;
    usable[static_cast<std::size_t>(i)] = true;
  }

  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  std::vector<int> active;
  std::vector<double> u;  // multipliers of active rows, same order

  auto remove_active = [&](std::size_t k) {
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(k));
    u.erase(u.begin() + static_cast<std::ptrdiff_t>(k));
  };

  int iterations = 0;
  while (true) {
    // Entering row: lowest index among violated rows.
    int entering = -1;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (!usable[static_cast<std::size_t>(i)]) continue;
      if (std::find(active.begin(), active.end(), static_cast<int>(i)) != active.end()) continue;
      if (C.row(i).dot(y) - e[i] > options.feasibility_tol) {
        entering = static_cast<int>(i);
        break;
      }
    }
    if (entering < 0) break;

    const Eigen::VectorXd cp = C.row(entering).transpose();
    double u_entering = 0.0;
    while (true) {
      if (++iterations > options.max_iterations)
        throw std::runtime_error("qp: iteration limit exceeded");

      const auto k = static_cast<Eigen::Index>(active.size());
      Eigen::VectorXd r(k);
      Eigen::VectorXd z = cp;
      if (k > 0) {
        Eigen::MatrixXd N(n, k);
        for (Eigen::Index j = 0; j < k; ++j) N.col(j) = C.row(active[static_cast<std::size_t>(j)]).transpose();
        r = (N.transpose() * N).ldlt().solve(N.transpose() * cp);
        z = cp - N * r;
      }

      // Largest dual step keeping active multipliers nonnegative.
      double t_dual = std::numeric_limits<double>::infinity();
      int leaving = -1;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (r[j] <= kRatioTol) continue;
        const double ratio = u[static_cast<std::size_t>(j)] / r[j];
        const bool better = ratio < t_dual ||
                            (ratio == t_dual && leaving >= 0 &&
                             active[static_cast<std::size_t>(j)] < active[static_cast<std::size_t>(leaving)]);
        if (better) {
          t_dual = ratio;
          leaving = static_cast<int>(j);
        }
      }

      const double zz = z.squaredNorm();
      const double violation = cp.dot(y) - e[entering];
      const double t_primal =
          zz > kDependenceTol ? violation / zz : std::numeric_limits<double>::infinity();

      if (!std::isfinite(t_dual) && !std::isfinite(t_primal)) {
        result.iterations = iterations;
        return result;  // certified infeasible
      }

      const double t = std::min(t_dual, t_primal);
      if (std::isfinite(t_primal)) y -= t * z;
      for (Eigen::Index j = 0; j < k; ++j) u[static_cast<std::size_t>(j)] -= t * r[j];
      u_entering += t;

      if (t_primal <= t_dual) {
        active.push_back(entering);
        u.push_back(u_entering);
        break;
      }
      remove_active(static_cast<std::size_t>(leaving));
    }
  }

  result.status = Status::optimal;
  result.iterations = iterations;
  result.x = problem.goal + y.cwiseQuotient(sqrt_w);
  result.multipliers = Eigen::VectorXd::Zero(rows);
  for (std::size_t j = 0; j < active.size(); ++j)
    result.multipliers[active[j]] = 2.0 * std::max(0.0, u[j]) / scale[active[j]];
  result.active = active;
  std::sort(result.active.begin(), result.active.end());
  result.residual = rows > 0 ? (problem.A * result.x - problem.b).maxCoeff() : 0.0;
  return result;
}

std::optional<Projection> project(const Eigen::VectorXd& point, const Eigen::MatrixXd& A,
                                  const Eigen::VectorXd& b) {
  Problem p{Eigen::VectorXd::Ones(point.size()), point, A, b};
  if (A.rows() == 0) p.A.resize(0, point.size());
  const Result r = solve(p);
  if (!r.ok()) return std::nullopt;
  return Projection{r.x, (r.x - point).norm()};
}

}  // namespace stemnav::qp
