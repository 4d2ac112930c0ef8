#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "otdp/grid.hpp"
#include "otdp/operators.hpp"
#include "otdp/problem.hpp"

namespace otdp {

/// Feedback law x -> u (writes nu entries).
using FeedbackFn = std::function<void(std::span<const double> x, std::span<double> u)>;

FeedbackFn zero_feedback(int nu);
/// Multilinear interpolation of a node table (size() x nu); points slightly
/// outside the box are projected onto it first.
FeedbackFn table_feedback(std::shared_ptr<const Grid> g, Eigen::MatrixXd table);

struct LyapunovGammas {
  std::optional<double> gamma1;  // lower Hessian bound; derived from the grid when absent
  std::optional<double> gamma2;  // upper Hessian bound; derived from the grid when absent
  double gamma3 = 1.0;
  double gamma4 = 1.0;
};

struct LyapunovCheck {
  double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0, gamma4 = 0.0;
  double min_hessian_eigenvalue = 0.0;
  double max_hessian_eigenvalue = 0.0;
  double min_boundary_flux = 0.0;  // min over boundary nodes of grad Q' n
  double margin = 0.0;             // min over nodes of gamma3 - gamma4 l[mu] - F[mu]' grad Q
  Index margin_node = 0;
  std::vector<Index> hessian_violations;
  std::vector<Index> boundary_violations;
  std::vector<Index> drift_violations;
  bool passed = false;
};

/// Checks gamma1 I <= Hess Q <= gamma2 I, grad Q' n >= 0 on the boundary and
/// F[mu]' grad Q <= gamma3 - gamma4 l[mu] at every node. Derivatives of Q by
/// central differences with step 1e-5 of the axis span. Throws MissingData
/// when the problem has no Q.
LyapunovCheck check_hasminskii(const ProblemSpec& p, const FeedbackFn& mu, const Grid& g,
                               const LyapunovGammas& gammas);

struct BakryEmeryOptions {
  double lambda = 0.0;
  std::optional<double> lambda_lower;  // caller-supplied bounds on the spectrum of P
  std::optional<double> lambda_upper;
  double tolerance = 1e-10;           // allowed negativity of the block eigenvalues
};

struct BakryEmeryCheck {
  double lambda = 0.0;
  double lambda_lower = 0.0;
  double lambda_upper = 0.0;
  double grid_lambda_lower = 0.0;  // spectrum of P over the nodes
  double grid_lambda_upper = 0.0;
  Eigen::VectorXd node_min_eigenvalue;  // NaN at flagged nodes
  double min_eigenvalue = 0.0;
  Index min_node = 0;
  std::vector<Index> flagged_nodes;     // feedback Jacobian jumps, excluded from the check
  double gamma = 0.0;
  bool passed = false;
};

/// Pointwise check of the generalized Bakry-Emery matrix inequality
///   [ R[mu]P - lambda P , (d_k eps P)_k' ; (d_k eps P)_k , I (x) eps P ] >= 0
/// with R[mu]P = (L P - F'P - P F'') / 2 and L P = F . grad P + eps Lap P
/// (entrywise). Throws PNotPositive if P is not positive definite at a node,
/// MissingData when no P is available.
BakryEmeryCheck check_bakry_emery(const ProblemSpec& p, const FeedbackFn& mu,
                                  const std::vector<std::vector<Expr>>& P, const Grid& g,
                                  const BakryEmeryOptions& opt);

struct DualityReport {
  double dual = 0.0;
  double primal = 0.0;
  double absolute_gap = 0.0;
  double relative_gap = 0.0;
};

DualityReport duality_report(double ell_dual, double primal_cost);

struct ConservationCheck {
  double max_identity_residual = 0.0;  // max |1'E^-1 A - 1'|, |1'E^-1 B|
  double max_mass_drift = 0.0;
  double min_component = 0.0;
  long samples = 0;
  bool passed = false;
};

/// Verifies the Markov identities and applies `samples` random feasible steps
/// (random masses, random controls in U) without clipping.
ConservationCheck check_conservation(const DiscreteSystem& sys, long samples = 1000,
                                     std::uint64_t seed = 1);

}  // namespace otdp
