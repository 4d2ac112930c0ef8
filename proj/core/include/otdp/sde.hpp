#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "otdp/grid.hpp"
#include "otdp/problem.hpp"

namespace otdp {

struct SimConfig {
  int trajectories = 64;
  double dt = 0.005;
  double T = 2000.0;
  std::uint64_t seed = 1;
  double burn_in = 0.2;             // fraction of T discarded before averaging
  std::optional<std::vector<double>> x0;  // default: box center
  double path_stride = 0.0;         // time between recorded samples, 0 disables
  int threads = 1;
};

struct PathSample {
  int trajectory = 0;
  double t = 0.0;
  std::vector<double> x;
};

struct SimResult {
  std::vector<double> trajectory_mean;  // time-average cost after burn-in
  double mean = 0.0;
  double standard_error = 0.0;
  std::vector<PathSample> paths;
};

/// Reflected Euler-Maruyama: X' = X + F[mu](X) dt + sqrt(2 eps dt) xi, then
/// mirrored into the box. The feedback is the multilinear interpolant of
/// `feedback` (size() x nu). Each trajectory owns an RNG stream seeded from
/// (seed, trajectory), so results do not depend on the thread count.
SimResult simulate(const ProblemSpec& p, const Grid& g, const Eigen::MatrixXd& feedback,
                   const SimConfig& cfg);

struct Path {
  std::vector<double> t;
  std::vector<std::vector<double>> x;
};

/// Noiseless rollouts from the given initial points, recorded every `stride`
/// time units (every step when zero).
std::vector<Path> simulate_deterministic(const ProblemSpec& p, const Grid& g,
                                         const Eigen::MatrixXd& feedback,
                                         const std::vector<std::vector<double>>& x0, double T,
                                         double dt, double stride = 0.0);

/// Eight points on a ring at 0.8 of the half-span around the box center in
/// 2-D; evenly spaced interior points otherwise.
std::vector<std::vector<double>> default_initial_points(const Box& omega);

/// Mirror reflection into [lo, hi], repeated until inside.
double reflect(double v, double lo, double hi) noexcept;

}  // namespace otdp
