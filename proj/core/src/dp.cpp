#include "otdp/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "otdp/error.hpp"

namespace otdp {

ValueIterate dp_step(const DiscreteSystem& sys, const DualCost& dc, const Vector& y_next) {
  const Index m = sys.size();
  const int nu = sys.inputs();
  const double h = sys.h;

  Eigen::MatrixXd lf(m, nu), lb(m, nu);
  for (int j = 0; j < nu; ++j) {
    lf.col(j) = sys.B[static_cast<std::size_t>(j)].fwd.transpose() * y_next / h;
    lb.col(j) = sys.B[static_cast<std::size_t>(j)].bwd.transpose() * y_next / h;
  }

  ValueIterate out;
  out.u.resize(m, nu);
  Vector rhs = sys.A.transpose() * y_next;
  double lfi[16], lbi[16], ui[16];
  std::vector<double> lfv, lbv, uv;
  std::span<double> sf(lfi, static_cast<std::size_t>(nu)), sb(lbi, static_cast<std::size_t>(nu)),
      su(ui, static_cast<std::size_t>(nu));
  if (nu > 16) {
    lfv.resize(static_cast<std::size_t>(nu));
    lbv.resize(static_cast<std::size_t>(nu));
    uv.resize(static_cast<std::size_t>(nu));
    sf = lfv;
    sb = lbv;
    su = uv;
  }
  for (Index i = 0; i < m; ++i) {
    for (int j = 0; j < nu; ++j) {
      sf[static_cast<std::size_t>(j)] = lf(i, j);
      sb[static_cast<std::size_t>(j)] = lb(i, j);
    }
    rhs[i] += h * dc.at_node_split(i, sf, sb, su);
    for (int j = 0; j < nu; ++j) out.u(i, j) = su[static_cast<std::size_t>(j)];
  }
  out.y = sys.solve_transpose(rhs);
  return out;
}

FiniteHorizonSolution solve_finite_horizon(const DiscreteSystem& sys, const DualCost& dc, long N,
                                           bool keep_schedule) {
  if (N < 1) throw Error("horizon must be at least one step");
  FiniteHorizonSolution out;
  Vector y = Vector::Zero(sys.size());
  if (keep_schedule) out.feedback.resize(static_cast<std::size_t>(N));
  for (long k = N - 1; k >= 0; --k) {
    ValueIterate v = dp_step(sys, dc, y);
    y = std::move(v.y);
    if (keep_schedule)
      out.feedback[static_cast<std::size_t>(k)] = std::move(v.u);
    else if (k == 0)
      out.feedback.push_back(std::move(v.u));
  }
  out.y0 = std::move(y);
  return out;
}

ErgodicSolution solve_ergodic(const DiscreteSystem& sys, const DualCost& dc, const ErgodicOptions& opt) {
  if (!(opt.tol > 0.0)) throw Error("tolerance must be positive");
  const Index m = sys.size();
  ErgodicSolution sol;
  sol.anchor = opt.anchor >= 0 ? opt.anchor : sys.grid().center_node();
  if (sol.anchor >= m) throw Error("anchor node out of range");
  const int s = std::max(opt.substeps, 1);

  Vector y = Vector::Zero(m);
  Eigen::MatrixXd u_check;
  double ell_check = 0.0;
  bool have_check = false;
  double residual = std::numeric_limits<double>::infinity();

  for (long outer = 1; outer <= opt.max_iter; ++outer) {
    ValueIterate v;
    for (int sub = 0; sub < s; ++sub) {
      v = dp_step(sys, dc, y);
      const double offset = v.y[sol.anchor];
      v.y.array() -= offset;
      v.offset_per_step = offset;
      y = v.y;
    }
    const double ell = v.offset_per_step / sys.h;
    double rel = std::numeric_limits<double>::infinity();
    if (have_check) {
      residual = (v.u - u_check).cwiseAbs().maxCoeff();
      rel = std::abs(ell - ell_check) / std::max(std::abs(ell), 1e-300);
    }
    ConvergenceRecord rec{outer, have_check ? residual : std::numeric_limits<double>::quiet_NaN(), ell};
    sol.trace.push_back(rec);
    if (opt.on_iteration) opt.on_iteration(rec);
    if (!std::isfinite(ell)) throw NoConvergence("value iteration diverged", outer, residual);

    if (have_check && residual <= opt.tol && (rel <= opt.offset_tol || ell == ell_check)) {
      sol.V_inf = std::move(y);
      sol.mu_inf = std::move(v.u);
      sol.ell_inf = ell;
      sol.iterations = outer;
      sol.residual = residual;
      return sol;
    }
    u_check = std::move(v.u);
    ell_check = ell;
    have_check = true;
  }
  throw NoConvergence("value iteration did not converge in " + std::to_string(opt.max_iter) +
                          " iterations (last feedback change " + std::to_string(residual) + ")",
                      opt.max_iter, residual);
}

const Eigen::MatrixXd& extract_feedback(const ValueIterate& v) { return v.u; }
const Eigen::MatrixXd& extract_feedback(const ErgodicSolution& s) { return s.mu_inf; }

Vector centered_value(const ErgodicSolution& s, const Vector& p) {
  const double mean = s.V_inf.dot(p) / p.sum();
  return s.V_inf.array() - mean;
}

}  // namespace otdp
