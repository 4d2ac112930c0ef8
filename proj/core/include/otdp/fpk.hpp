#pragma once

#include <vector>

#include <Eigen/Core>

#include "otdp/conjugate.hpp"
#include "otdp/operators.hpp"

namespace otdp {

/// Node masses at a time instant.
struct DensityState {
  Vector p;
  double time = 0.0;
};

struct EnergySample {
  double t = 0.0;
  double E = 0.0;
};

using EnergyTrace = std::vector<EnergySample>;

/// N = A + sum_j (Bf_j diag(u+_j) + Bb_j diag(u-_j)); one step is E p' = N p.
SparseMatrix closed_loop_matrix(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback);

/// Continuous closed-loop generator A_c + sum_j B_c(u_j), recovered as (N - E) / h.
SparseMatrix closed_loop_generator(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback);

/// Fixed point of the one-step map with unit mass, by shifted inverse
/// iteration. Throws NoConvergence.
DensityState steady_state(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback,
                          double tol = 1e-12, int max_iter = 200);

/// E = sum (p_i - q_i)^2 / q_i.
double energy(const Vector& p, const Vector& p_inf);

struct Propagation {
  DensityState final_state;
  EnergyTrace trace;
  std::vector<DensityState> snapshots;
  double max_increase = 0.0;  // largest E(t_{k+1}) - E(t_k), zero if monotone
  bool monotone = true;       // within 1e-10
};

/// Rolls the closed-loop map for `steps` steps, recording the energy after
/// every step and a snapshot every `stride` steps (0 disables snapshots).
/// With `check_positivity` the mass and sign invariants are enforced
/// (PositivityViolation); without it signed perturbations may be rolled.
Propagation propagate(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback,
                      const DensityState& p0, const Vector& p_inf, long steps, long stride = 0,
                      bool check_positivity = true);

/// Least-squares slope of -1/2 log E over the trailing `window` fraction of
/// the samples with E > 1e-14. Throws InsufficientData below 10 such samples.
double estimate_decay_rate(const EnergyTrace& trace, double window = 0.5);

/// Largest gamma with E(t) <= E(0) exp(-2 gamma t) over the whole trace.
double envelope_decay_rate(const EnergyTrace& trace);

struct UniformRate {
  double gamma = 0.0;     // smallest nonzero eigenvalue of the symmetrized generator
  Vector direction;       // slowest initial perturbation, as masses with zero sum
  int iterations = 0;
};

/// Uniform dissipation rate in L2(1/p_inf): smallest eigenvalue of
/// -(W L W^-1 + (W L W^-1)') / 2 on the complement of sqrt(p_inf), with
/// W = diag(p_inf)^-1/2 and L the continuous closed-loop generator.
UniformRate uniform_decay_rate(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback,
                               const Vector& p_inf, double tol = 1e-9, int max_iter = 2000);

/// Subdominant eigenvalue modulus of the one-step map, by power iteration on
/// the complement of the steady state; returns -log(|lambda_2|) / h.
double subdominant_rate(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback, const Vector& p_inf,
                        int max_iter = 20000, double tol = 1e-10);

/// sum_i l(x_i, u_i) p_i
double primal_cost(const Grid& g, const DualCost& dc, const Eigen::MatrixXd& feedback, const Vector& p);

}  // namespace otdp
