#include "otdp/sde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "otdp/error.hpp"

namespace otdp {

double reflect(double v, double lo, double hi) noexcept {
  if (!std::isfinite(v)) return 0.5 * (lo + hi);
  const double w = hi - lo;
  // Fold with period 2w, which is the repeated mirror map.
  if (v < lo || v > hi) {
    double r = std::fmod(v - lo, 2.0 * w);
    if (r < 0.0) r += 2.0 * w;
    v = r <= w ? lo + r : hi - (r - w);
  }
  return std::clamp(v, lo, hi);
}

namespace {

struct Stepper {
  const ProblemSpec& p;
  const Grid& g;
  std::vector<double> table;  // node-major
  int nu;

  Stepper(const ProblemSpec& prob, const Grid& grid, const Eigen::MatrixXd& feedback)
      : p(prob), g(grid), nu(prob.nu) {
    if (feedback.rows() != grid.size() || feedback.cols() != prob.nu)
      throw Error("feedback table does not match the grid");
    table.resize(static_cast<std::size_t>(feedback.size()));
    for (Index i = 0; i < feedback.rows(); ++i)
      for (int j = 0; j < nu; ++j) table[static_cast<std::size_t>(i * nu + j)] = feedback(i, j);
  }

  // Evaluates u and the drift at x; returns the stage cost.
  double drift(std::span<const double> x, std::span<double> u, std::span<double> F) const {
    if (nu > 0) g.interpolate(table, nu, x, u);
    p.closed_loop_drift(x, u, F);
    return p.stage_cost(x, u);
  }
};

std::seed_seq::result_type mix(std::uint64_t v, int k) {
  return static_cast<std::seed_seq::result_type>((v >> (32 * k)) & 0xffffffffu);
}

}  // namespace

SimResult simulate(const ProblemSpec& p, const Grid& g, const Eigen::MatrixXd& feedback,
                   const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw Error("dt must be positive");
  if (!(cfg.burn_in >= 0.0 && cfg.burn_in < 1.0)) throw Error("burn-in must lie in [0, 1)");
  if (cfg.trajectories < 1) throw Error("at least one trajectory is required");
  const Stepper st(p, g, feedback);
  const std::size_t n = static_cast<std::size_t>(p.nx);
  const long steps = static_cast<long>(std::llround(cfg.T / cfg.dt));
  const long burn = static_cast<long>(std::floor(cfg.burn_in * static_cast<double>(steps)));
  const double noise = std::sqrt(2.0 * p.epsilon * cfg.dt);
  const long path_every =
      cfg.path_stride > 0.0 ? std::max<long>(1, std::lround(cfg.path_stride / cfg.dt)) : 0;

  std::vector<double> x0(n);
  if (cfg.x0) {
    if (cfg.x0->size() != n) throw Error("initial point has the wrong dimension");
    x0 = *cfg.x0;
  } else {
    for (std::size_t a = 0; a < n; ++a) x0[a] = 0.5 * (p.Omega[a].lo + p.Omega[a].hi);
  }

  SimResult res;
  res.trajectory_mean.assign(static_cast<std::size_t>(cfg.trajectories), 0.0);
  std::vector<std::vector<PathSample>> paths(static_cast<std::size_t>(cfg.trajectories));

  auto run = [&](int traj) {
    std::seed_seq seq{mix(cfg.seed, 0), mix(cfg.seed, 1), static_cast<std::seed_seq::result_type>(traj),
                      0x9e3779b9u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    std::vector<double> x(x0), u(static_cast<std::size_t>(p.nu)), F(n);
    double acc = 0.0;
    long counted = 0;
    auto& mine = paths[static_cast<std::size_t>(traj)];
    if (path_every) mine.push_back({traj, 0.0, x});
    for (long k = 0; k < steps; ++k) {
      const double c = st.drift(x, u, F);
      if (k >= burn) {
        acc += c;
        ++counted;
      }
      for (std::size_t a = 0; a < n; ++a) {
        const double v = x[a] + F[a] * cfg.dt + noise * normal(rng);
        x[a] = reflect(v, p.Omega[a].lo, p.Omega[a].hi);
      }
      if (path_every && (k + 1) % path_every == 0)
        mine.push_back({traj, static_cast<double>(k + 1) * cfg.dt, x});
    }
    res.trajectory_mean[static_cast<std::size_t>(traj)] = counted ? acc / static_cast<double>(counted) : 0.0;
  };

  const int threads = std::max(1, std::min(cfg.threads, cfg.trajectories));
  if (threads == 1) {
    for (int t = 0; t < cfg.trajectories; ++t) run(t);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (int t = w; t < cfg.trajectories; t += threads) run(t);
      });
    for (auto& th : pool) th.join();
  }

  // Fixed-order reduction keeps the result independent of scheduling.
  const double N = static_cast<double>(cfg.trajectories);
  double sum = 0.0;
  for (double v : res.trajectory_mean) sum += v;
  res.mean = sum / N;
  if (cfg.trajectories > 1) {
    double ss = 0.0;
    for (double v : res.trajectory_mean) ss += (v - res.mean) * (v - res.mean);
    res.standard_error = std::sqrt(ss / (N - 1.0) / N);
  }
  for (auto& pth : paths)
    for (auto& s : pth) res.paths.push_back(std::move(s));
  return res;
}

std::vector<Path> simulate_deterministic(const ProblemSpec& p, const Grid& g,
                                         const Eigen::MatrixXd& feedback,
                                         const std::vector<std::vector<double>>& x0, double T,
                                         double dt, double stride) {
  if (!(dt > 0.0)) throw Error("dt must be positive");
  const Stepper st(p, g, feedback);
  const std::size_t n = static_cast<std::size_t>(p.nx);
  const long steps = static_cast<long>(std::llround(T / dt));
  const long every = stride > 0.0 ? std::max<long>(1, std::lround(stride / dt)) : 1;
  std::vector<Path> out;
  for (const auto& start : x0) {
    if (start.size() != n) throw Error("initial point has the wrong dimension");
    Path path;
    std::vector<double> x(start), u(static_cast<std::size_t>(p.nu)), F(n);
    for (std::size_t a = 0; a < n; ++a) x[a] = reflect(x[a], p.Omega[a].lo, p.Omega[a].hi);
    path.t.push_back(0.0);
    path.x.push_back(x);
    for (long k = 0; k < steps; ++k) {
      st.drift(x, u, F);
      for (std::size_t a = 0; a < n; ++a) x[a] = reflect(x[a] + F[a] * dt, p.Omega[a].lo, p.Omega[a].hi);
      if ((k + 1) % every == 0) {
        path.t.push_back(static_cast<double>(k + 1) * dt);
        path.x.push_back(x);
      }
    }
    out.push_back(std::move(path));
  }
  return out;
}

std::vector<std::vector<double>> default_initial_points(const Box& omega) {
  std::vector<std::vector<double>> pts;
  const std::size_t n = omega.size();
  std::vector<double> c(n), half(n);
  for (std::size_t a = 0; a < n; ++a) {
    c[a] = 0.5 * (omega[a].lo + omega[a].hi);
    half[a] = 0.5 * omega[a].width();
  }
  if (n == 2) {
    for (int k = 0; k < 8; ++k) {
      const double th = 2.0 * std::numbers::pi * k / 8.0;
      pts.push_back({c[0] + 0.8 * half[0] * std::cos(th), c[1] + 0.8 * half[1] * std::sin(th)});
    }
    return pts;
  }
  for (int k = 0; k < 8; ++k) {
    std::vector<double> x(n);
    const double s = -0.8 + 1.6 * k / 7.0;
    for (std::size_t a = 0; a < n; ++a) x[a] = c[a] + s * half[a];
    pts.push_back(std::move(x));
  }
  return pts;
}

}  // namespace otdp
