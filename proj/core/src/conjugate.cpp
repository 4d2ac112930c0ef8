#include "otdp/conjugate.hpp"

#include <algorithm>
#include <limits>

namespace otdp {

double channel_min(double lambda, double R, const Interval& U, double& u) noexcept {
  u = std::clamp(-lambda / R, U.lo, U.hi);
  return 0.5 * R * u * u + lambda * u;
}

double split_channel_min(double lf, double lb, double R, const Interval& U, double& u) noexcept {
  double best = std::numeric_limits<double>::infinity();
  const double plo = std::max(U.lo, 0.0);
  if (U.hi >= plo) {
    double v = std::clamp(-lf / R, plo, U.hi);
    best = 0.5 * R * v * v + lf * v;
    u = v;
  }
  const double nhi = std::min(U.hi, 0.0);
  if (U.lo <= nhi) {
    double v = std::clamp(lb / R, U.lo, nhi);
    double val = 0.5 * R * v * v - lb * v;
    if (val < best) {
      best = val;
      u = v;
    }
  }
  return best;
}

DualMin dual_argmin(const ProblemSpec& p, std::span<const double> x, std::span<const double> lambda) {
  DualMin out;
  out.u.assign(static_cast<std::size_t>(p.nu), 0.0);
  out.d = p.q.eval(x, out.u);
  for (std::size_t j = 0; j < out.u.size(); ++j)
    out.d += channel_min(lambda[j], p.R[j], p.U[j], out.u[j]);
  return out;
}

DualCost::DualCost(const ProblemSpec& p, const Grid& g) : p_(p), q_(g.size()) {
  std::vector<double> x(static_cast<std::size_t>(g.dim()));
  std::vector<double> u0(static_cast<std::size_t>(p.nu), 0.0);
  for (Index i = 0; i < g.size(); ++i) {
    g.node(i, x);
    q_[i] = p.q.eval(x, u0);
  }
}

double DualCost::at_node(Index i, std::span<const double> lambda, std::span<double> u) const {
  double d = q_[i];
  for (std::size_t j = 0; j < u.size(); ++j) d += channel_min(lambda[j], p_.R[j], p_.U[j], u[j]);
  return d;
}

double DualCost::at_node_split(Index i, std::span<const double> lf, std::span<const double> lb,
                               std::span<double> u) const {
  double d = q_[i];
  for (std::size_t j = 0; j < u.size(); ++j)
    d += split_channel_min(lf[j], lb[j], p_.R[j], p_.U[j], u[j]);
  return d;
}

Eigen::VectorXd dual_perspective(const DualCost& dc, const Eigen::VectorXd& omega,
                                 const Eigen::MatrixXd& lambda, Eigen::MatrixXd* u_out) {
  const Index m = dc.size();
  const int nu = dc.problem().nu;
  Eigen::VectorXd D(m);
  if (u_out) u_out->resize(m, nu);
  std::vector<double> lam(static_cast<std::size_t>(nu)), u(static_cast<std::size_t>(nu));
  for (Index i = 0; i < m; ++i) {
    for (int j = 0; j < nu; ++j) lam[static_cast<std::size_t>(j)] = lambda(i, j) / omega[i];
    D[i] = omega[i] * dc.at_node(i, lam, u);
    if (u_out)
      for (int j = 0; j < nu; ++j) (*u_out)(i, j) = u[static_cast<std::size_t>(j)];
  }
  return D;
}

double hamiltonian(const ProblemSpec& p, std::span<const double> x, std::span<const double> grad_v) {
  std::vector<double> u0(static_cast<std::size_t>(p.nu), 0.0);
  std::vector<double> lam(static_cast<std::size_t>(p.nu), 0.0);
  double h = 0.0;
  for (int i = 0; i < p.nx; ++i) {
    const auto si = static_cast<std::size_t>(i);
    h += grad_v[si] * p.f[si].eval(x, u0);
    for (int j = 0; j < p.nu; ++j)
      lam[static_cast<std::size_t>(j)] += p.G[si][static_cast<std::size_t>(j)].eval(x, u0) * grad_v[si];
  }
  return h + dual_argmin(p, x, lam).d;
}

}  // namespace otdp
