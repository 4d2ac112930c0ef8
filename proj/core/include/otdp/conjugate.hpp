#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "otdp/grid.hpp"
#include "otdp/problem.hpp"

namespace otdp {

/// min over u in [lo, hi] of R/2 u^2 + lambda u. Writes the minimizer to `u`.
double channel_min(double lambda, double R, const Interval& U, double& u) noexcept;

/// min over u in [lo, hi] of R/2 u^2 + lf max(u, 0) + lb max(-u, 0). For
/// lb = -lf this is channel_min(lf, ...).
double split_channel_min(double lf, double lb, double R, const Interval& U, double& u) noexcept;

struct DualMin {
  std::vector<double> u;
  double d = 0.0;
};

/// d(x, lambda) = min over u in U of l(x, u) + lambda'u, with its minimizer
/// u*_j = clamp(-lambda_j / R_j, lo_j, hi_j).
DualMin dual_argmin(const ProblemSpec& p, std::span<const double> x, std::span<const double> lambda);

/// Dual cost bound to a grid, with q cached at the nodes.
class DualCost {
 public:
  DualCost(const ProblemSpec& p, const Grid& g);

  const ProblemSpec& problem() const noexcept { return p_; }
  const Eigen::VectorXd& q() const noexcept { return q_; }
  Index size() const noexcept { return q_.size(); }

  /// d(x_i, lambda) for a node; `u` receives the minimizer (nu entries).
  double at_node(Index i, std::span<const double> lambda, std::span<double> u) const;
  /// Same with split multipliers (forward and backward transport).
  double at_node_split(Index i, std::span<const double> lf, std::span<const double> lb,
                       std::span<double> u) const;

 private:
  ProblemSpec p_;
  Eigen::VectorXd q_;
};

/// D(lambda)_i = omega_i d(x_i, lambda_i / omega_i). `lambda` is size() x nu.
/// When `u_out` is given it receives the per-node minimizers.
Eigen::VectorXd dual_perspective(const DualCost& dc, const Eigen::VectorXd& omega,
                                 const Eigen::MatrixXd& lambda, Eigen::MatrixXd* u_out = nullptr);

/// H(x, g) = g'f(x) + d(x, G(x)'g).
double hamiltonian(const ProblemSpec& p, std::span<const double> x, std::span<const double> grad_v);

}  // namespace otdp
