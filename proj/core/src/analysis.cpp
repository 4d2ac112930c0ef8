#include "otdp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "otdp/error.hpp"

namespace otdp {

FeedbackFn zero_feedback(int nu) {
  return [nu](std::span<const double>, std::span<double> u) {
    for (int j = 0; j < nu; ++j) u[static_cast<std::size_t>(j)] = 0.0;
  };
}

FeedbackFn table_feedback(std::shared_ptr<const Grid> g, Eigen::MatrixXd table) {
  // Row-major copy so that node values are contiguous.
  auto data = std::make_shared<std::vector<double>>(static_cast<std::size_t>(table.size()));
  const int nu = static_cast<int>(table.cols());
  for (Index i = 0; i < table.rows(); ++i)
    for (int j = 0; j < nu; ++j) (*data)[static_cast<std::size_t>(i * nu + j)] = table(i, j);
  return [g, data, nu](std::span<const double> x, std::span<double> u) {
    double buf[8];
    std::vector<double> big;
    std::span<double> xc(buf, x.size());
    if (x.size() > 8) {
      big.resize(x.size());
      xc = big;
    }
    for (std::size_t a = 0; a < x.size(); ++a) xc[a] = std::clamp(x[a], g->box()[a].lo, g->box()[a].hi);
    g->interpolate(*data, nu, xc, u);
  };
}

namespace {

struct FiniteDiff {
  std::vector<double> step;

  explicit FiniteDiff(const Grid& g) {
    for (const auto& iv : g.box()) step.push_back(1e-5 * iv.width());
  }

  static double eval(const Expr& e, std::vector<double>& x) { return e.eval(x); }

  double d1(const Expr& e, std::vector<double>& x, std::size_t k) const {
    const double xk = x[k], hk = step[k];
    x[k] = xk + hk;
    const double fp = eval(e, x);
    x[k] = xk - hk;
    const double fm = eval(e, x);
    x[k] = xk;
    return (fp - fm) / (2.0 * hk);
  }

  double d2(const Expr& e, std::vector<double>& x, std::size_t k, std::size_t l) const {
    if (k == l) {
      const double xk = x[k], hk = step[k];
      const double f0 = eval(e, x);
      x[k] = xk + hk;
      const double fp = eval(e, x);
      x[k] = xk - hk;
      const double fm = eval(e, x);
      x[k] = xk;
      return (fp - 2.0 * f0 + fm) / (hk * hk);
    }
    const double xk = x[k], xl = x[l], hk = step[k], hl = step[l];
    double s = 0.0;
    for (int a : {1, -1})
      for (int b : {1, -1}) {
        x[k] = xk + a * hk;
        x[l] = xl + b * hl;
        s += a * b * eval(e, x);
      }
    x[k] = xk;
    x[l] = xl;
    return s / (4.0 * hk * hl);
  }
};

double symmetric_min_eig(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

}  // namespace

LyapunovCheck check_hasminskii(const ProblemSpec& p, const FeedbackFn& mu, const Grid& g,
                               const LyapunovGammas& gammas) {
  if (!p.Q) throw MissingData("MissingQ: the problem has no Lyapunov function Q");
  const Expr& Q = *p.Q;
  const int n = p.nx;
  const auto nn = static_cast<std::size_t>(n);
  FiniteDiff fd(g);
  const Index m = g.size();

  std::vector<Eigen::Vector2d> hess_range(static_cast<std::size_t>(m));
  std::vector<double> flux_min(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
  std::vector<double> drift_rest(static_cast<std::size_t>(m));
  std::vector<double> x(nn), u(static_cast<std::size_t>(p.nu)), F(nn), grad(nn);
  Eigen::MatrixXd H(n, n);

  for (Index i = 0; i < m; ++i) {
    g.node(i, x);
    for (std::size_t k = 0; k < nn; ++k) grad[k] = fd.d1(Q, x, k);
    for (std::size_t k = 0; k < nn; ++k)
      for (std::size_t l = k; l < nn; ++l)
        H(static_cast<Index>(k), static_cast<Index>(l)) = H(static_cast<Index>(l), static_cast<Index>(k)) =
            fd.d2(Q, x, k, l);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    hess_range[static_cast<std::size_t>(i)] = {es.eigenvalues()[0], es.eigenvalues()[n - 1]};

    for (int a = 0; a < n; ++a) {
      const int k = g.axis_index(i, a);
      if (k == 0) flux_min[static_cast<std::size_t>(i)] = std::min(flux_min[static_cast<std::size_t>(i)], -grad[static_cast<std::size_t>(a)]);
      if (k == g.count(a) - 1) flux_min[static_cast<std::size_t>(i)] = std::min(flux_min[static_cast<std::size_t>(i)], grad[static_cast<std::size_t>(a)]);
    }

    mu(x, u);
    p.closed_loop_drift(x, u, F);
    double fg = 0.0;
    for (std::size_t k = 0; k < nn; ++k) fg += F[k] * grad[k];
    drift_rest[static_cast<std::size_t>(i)] = gammas.gamma4 * p.stage_cost(x, u) + fg;
  }

  LyapunovCheck out;
  out.min_hessian_eigenvalue = std::numeric_limits<double>::infinity();
  out.max_hessian_eigenvalue = -std::numeric_limits<double>::infinity();
  for (const auto& r : hess_range) {
    out.min_hessian_eigenvalue = std::min(out.min_hessian_eigenvalue, r[0]);
    out.max_hessian_eigenvalue = std::max(out.max_hessian_eigenvalue, r[1]);
  }
  out.gamma1 = gammas.gamma1.value_or(out.min_hessian_eigenvalue);
  out.gamma2 = gammas.gamma2.value_or(out.max_hessian_eigenvalue);
  out.gamma3 = gammas.gamma3;
  out.gamma4 = gammas.gamma4;

  const double htol = 1e-6 * std::max(1.0, std::max(std::abs(out.gamma1), std::abs(out.gamma2)));
  out.min_boundary_flux = std::numeric_limits<double>::infinity();
  out.margin = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < m; ++i) {
    const auto si = static_cast<std::size_t>(i);
    if (hess_range[si][0] < out.gamma1 - htol || hess_range[si][1] > out.gamma2 + htol)
      out.hessian_violations.push_back(i);
    if (std::isfinite(flux_min[si])) {
      out.min_boundary_flux = std::min(out.min_boundary_flux, flux_min[si]);
      if (flux_min[si] < -1e-8) out.boundary_violations.push_back(i);
    }
    const double v = out.gamma3 - drift_rest[si];
    if (v < out.margin) {
      out.margin = v;
      out.margin_node = i;
    }
    if (v < 0.0) out.drift_violations.push_back(i);
  }
  out.passed = out.gamma1 > 0.0 && out.gamma2 >= out.gamma1 && out.gamma3 > 0.0 && out.gamma4 > 0.0 &&
               out.hessian_violations.empty() && out.boundary_violations.empty() &&
               out.drift_violations.empty();
  return out;
}

BakryEmeryCheck check_bakry_emery(const ProblemSpec& p, const FeedbackFn& mu,
                                  const std::vector<std::vector<Expr>>& P, const Grid& g,
                                  const BakryEmeryOptions& opt) {
  const int n = p.nx;
  const auto nn = static_cast<std::size_t>(n);
  if (P.size() != nn) throw MissingData("MissingP: weight P must be nx-by-nx");
  for (const auto& row : P)
    if (row.size() != nn) throw MissingData("MissingP: weight P must be nx-by-nx");

  FiniteDiff fd(g);
  const Index m = g.size();
  const double eps = p.epsilon;
  const int bs = n + n * n;

  std::vector<double> x(nn), F(nn), Fp(nn), Fm(nn);
  std::vector<double> u(static_cast<std::size_t>(p.nu)), up(u), um(u);
  Eigen::MatrixXd Pm(n, n), Lp(n, n), J(n, n), blk(bs, bs);
  std::vector<Eigen::MatrixXd> dP(nn, Eigen::MatrixXd(n, n));
  std::vector<double> jump(static_cast<std::size_t>(m), 0.0);

  BakryEmeryCheck out;
  out.lambda = opt.lambda;
  out.node_min_eigenvalue.resize(m);
  out.grid_lambda_lower = std::numeric_limits<double>::infinity();
  out.grid_lambda_upper = -std::numeric_limits<double>::infinity();

  for (Index i = 0; i < m; ++i) {
    g.node(i, x);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const Expr& e = P[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        Pm(a, b) = e.eval(x);
        double lap = 0.0;
        for (std::size_t k = 0; k < nn; ++k) {
          dP[k](a, b) = fd.d1(e, x, k);
          lap += fd.d2(e, x, k, k);
        }
        Lp(a, b) = eps * lap;
      }
    Pm = (0.5 * (Pm + Pm.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> pes(Pm, Eigen::EigenvaluesOnly);
    if (!(pes.eigenvalues()[0] > 0.0))
      throw PNotPositive("P is not positive definite at node " + std::to_string(i));
    out.grid_lambda_lower = std::min(out.grid_lambda_lower, pes.eigenvalues()[0]);
    out.grid_lambda_upper = std::max(out.grid_lambda_upper, pes.eigenvalues()[n - 1]);

    // F = f + G mu and its Jacobian; the feedback part is tracked for kinks.
    mu(x, u);
    p.closed_loop_drift(x, u, F);
    double jn = 0.0;
    for (std::size_t k = 0; k < nn; ++k) {
      const double xk = x[k];
      x[k] = xk + fd.step[k];
      mu(x, up);
      p.closed_loop_drift(x, up, Fp);
      x[k] = xk - fd.step[k];
      mu(x, um);
      p.closed_loop_drift(x, um, Fm);
      x[k] = xk;
      for (std::size_t r = 0; r < nn; ++r)
        J(static_cast<Index>(r), static_cast<Index>(k)) = (Fp[r] - Fm[r]) / (2.0 * fd.step[k]);
      for (std::size_t j = 0; j < up.size(); ++j) {
        const double d = (up[j] - um[j]) / (2.0 * fd.step[k]);
        jn += d * d;
      }
    }
    jump[static_cast<std::size_t>(i)] = std::sqrt(jn);

    for (std::size_t k = 0; k < nn; ++k) Lp += F[k] * dP[k];
    Eigen::MatrixXd RP = 0.5 * (Lp - J * Pm - Pm * J.transpose());
    blk.setZero();
    blk.topLeftCorner(n, n) = RP - opt.lambda * Pm;
    for (int k = 0; k < n; ++k) {
      blk.block(n + k * n, 0, n, n) = eps * dP[static_cast<std::size_t>(k)];
      blk.block(0, n + k * n, n, n) = eps * dP[static_cast<std::size_t>(k)].transpose();
      blk.block(n + k * n, n + k * n, n, n) = eps * Pm;
    }
    blk = (0.5 * (blk + blk.transpose())).eval();
    out.node_min_eigenvalue[i] = symmetric_min_eig(blk);
  }

  // Nodes where the feedback Jacobian jumps far above its typical size.
  std::vector<double> nz;
  for (double v : jump)
    if (v > 0.0) nz.push_back(v);
  if (!nz.empty()) {
    std::nth_element(nz.begin(), nz.begin() + static_cast<std::ptrdiff_t>(nz.size() / 2), nz.end());
    const double median = nz[nz.size() / 2];
    for (Index i = 0; i < m; ++i)
      if (jump[static_cast<std::size_t>(i)] > 10.0 * median) {
        out.flagged_nodes.push_back(i);
        out.node_min_eigenvalue[i] = std::numeric_limits<double>::quiet_NaN();
      }
  }

  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < m; ++i) {
    const double v = out.node_min_eigenvalue[i];
    if (std::isnan(v)) continue;
    if (v < out.min_eigenvalue) {
      out.min_eigenvalue = v;
      out.min_node = i;
    }
  }

  bool bounds_ok = true;
  out.lambda_lower = opt.lambda_lower.value_or(out.grid_lambda_lower);
  out.lambda_upper = opt.lambda_upper.value_or(out.grid_lambda_upper);
  if (out.lambda_lower > out.grid_lambda_lower * (1.0 + 1e-12) ||
      out.lambda_upper < out.grid_lambda_upper * (1.0 - 1e-12) || !(out.lambda_lower > 0.0))
    bounds_ok = false;
  out.gamma = 2.0 * out.lambda * (out.lambda_lower / out.lambda_upper);
  out.passed = bounds_ok && out.min_eigenvalue >= -opt.tolerance;
  return out;
}

DualityReport duality_report(double ell_dual, double primal_cost) {
  DualityReport r;
  r.dual = ell_dual;
  r.primal = primal_cost;
  r.absolute_gap = std::abs(ell_dual - primal_cost);
  r.relative_gap = r.absolute_gap / std::max(std::abs(ell_dual), std::numeric_limits<double>::min());
  return r;
}

ConservationCheck check_conservation(const DiscreteSystem& sys, long samples, std::uint64_t seed) {
  ConservationCheck out;
  const Index m = sys.size();
  const int nu = sys.inputs();
  const Vector ones = Vector::Ones(m);
  const Vector z = sys.solve_transpose(ones);
  out.max_identity_residual = (sys.A.transpose() * z - ones).cwiseAbs().maxCoeff();
  for (const auto& ch : sys.B) {
    out.max_identity_residual = std::max(out.max_identity_residual, (ch.fwd.transpose() * z).cwiseAbs().maxCoeff());
    out.max_identity_residual = std::max(out.max_identity_residual, (ch.bwd.transpose() * z).cwiseAbs().maxCoeff());
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  out.min_component = std::numeric_limits<double>::infinity();
  Vector p(m);
  Eigen::MatrixXd u(m, nu);
  for (long s = 0; s < samples; ++s) {
    for (Index i = 0; i < m; ++i) p[i] = -std::log(1.0 - unit(rng));
    // Every fourth sample is concentrated on a few nodes.
    if (s % 4 == 3)
      for (Index i = 0; i < m; ++i)
        if (unit(rng) > 0.05) p[i] = 0.0;
    if (p.sum() == 0.0) p[0] = 1.0;
    p /= p.sum();
    for (Index i = 0; i < m; ++i)
      for (int j = 0; j < nu; ++j) {
        const Interval& U = sys.U[static_cast<std::size_t>(j)];
        const double r = unit(rng);
        // Mix interior samples with the vertices of U.
        u(i, j) = r < 0.25 ? U.lo : r > 0.75 ? U.hi : U.lo + (U.hi - U.lo) * unit(rng);
      }
    const Vector next = step_unchecked(sys, p, u);
    out.max_mass_drift = std::max(out.max_mass_drift, std::abs(next.sum() - p.sum()));
    out.min_component = std::min(out.min_component, next.minCoeff());
  }
  out.samples = samples;
  out.passed = out.max_identity_residual <= 1e-10 && out.max_mass_drift <= 1e-10 &&
               out.min_component >= -1e-12;
  return out;
}

}  // namespace otdp
