#include "otdp/problem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "otdp/error.hpp"

namespace otdp {

double ProblemSpec::stage_cost(std::span<const double> x, std::span<const double> u) const {
  double c = q.eval(x, u);
  for (int j = 0; j < nu; ++j) c += 0.5 * R[static_cast<std::size_t>(j)] * u[j] * u[j];
  return c;
}

void ProblemSpec::closed_loop_drift(std::span<const double> x, std::span<const double> u,
                                    std::span<double> out) const {
  for (int i = 0; i < nx; ++i) {
    double v = f[static_cast<std::size_t>(i)].eval(x, u);
    for (int j = 0; j < nu; ++j) v += G[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].eval(x, u) * u[j];
    out[static_cast<std::size_t>(i)] = v;
  }
}

namespace {

void visit_lattice(const Box& box, int per_axis, const std::function<void(std::span<const double>)>& fn) {
  const std::size_t n = box.size();
  std::vector<int> idx(n, 0);
  std::vector<double> x(n);
  for (;;) {
    for (std::size_t a = 0; a < n; ++a)
      x[a] = box[a].lo + box[a].width() * idx[a] / (per_axis - 1);
    fn(x);
    std::size_t a = 0;
    while (a < n && ++idx[a] == per_axis) idx[a++] = 0;
    if (a == n) break;
  }
}

}  // namespace

ValidationReport validate_spec(const ProblemSpec& p) {
  ValidationReport rep;
  auto add = [&](std::string msg) { rep.violations.push_back(std::move(msg)); };
  const auto nx = static_cast<std::size_t>(p.nx);
  const auto nu = static_cast<std::size_t>(p.nu);

  if (p.nx < 1) add("state dimension must be at least 1");
  if (p.nu < 0) add("input dimension must be nonnegative");
  if (!(p.epsilon > 0.0) || !std::isfinite(p.epsilon)) add("epsilon must be positive");
  if (p.f.size() != nx) add("drift must have nx components");
  if (p.G.size() != nx) add("input map must have nx rows");
  for (const auto& row : p.G)
    if (row.size() != nu) {
      add("input map rows must have nu entries");
      break;
    }
  if (p.R.size() != nu) add("control cost weights must have nu entries");
  for (double r : p.R)
    if (!(r > 0.0) || !std::isfinite(r)) {
      add("control cost not strongly convex");
      break;
    }
  if (p.U.size() != nu) add("control box must have nu components");
  for (std::size_t j = 0; j < p.U.size(); ++j)
    if (!(p.U[j].lo < p.U[j].hi) || !std::isfinite(p.U[j].lo) || !std::isfinite(p.U[j].hi))
      add("control box component " + std::to_string(j + 1) + " must satisfy lower < upper");
  if (p.Omega.size() != nx) add("domain box must have nx components");
  for (std::size_t i = 0; i < p.Omega.size(); ++i)
    if (!(p.Omega[i].lo < p.Omega[i].hi) || !std::isfinite(p.Omega[i].lo) ||
        !std::isfinite(p.Omega[i].hi))
      add("domain component " + std::to_string(i + 1) + " must satisfy lower < upper");
  if (p.P) {
    if (p.P->size() != nx) add("weight P must be nx-by-nx");
    for (const auto& row : *p.P)
      if (row.size() != nx) {
        add("weight P must be nx-by-nx");
        break;
      }
  }
  if (!rep.ok()) return rep;

  auto check_vars = [&](const Expr& e, const std::string& what, bool allow_input) {
    if (e.max_state_index() >= p.nx) add(what + " refers to an undefined state variable");
    if (e.max_input_index() >= p.nu) add(what + " refers to an undefined input variable");
    if (!allow_input && e.depends_on_input()) add(what + " must not depend on inputs");
  };
  for (std::size_t i = 0; i < nx; ++i) {
    check_vars(p.f[i], "drift component " + std::to_string(i + 1), false);
    for (std::size_t j = 0; j < nu; ++j)
      check_vars(p.G[i][j], "input map entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")", false);
  }
  check_vars(p.q, "state cost q", false);
  if (p.Q) check_vars(*p.Q, "Lyapunov function Q", false);
  if (p.P)
    for (const auto& row : *p.P)
      for (const auto& e : row) check_vars(e, "weight P", false);
  if (!rep.ok()) return rep;

  // Sample on a coarse lattice of Omega x vertices(U).
  const int per_axis = p.nx <= 3 ? 7 : 3;
  bool bad_f = false, bad_q = false, bad_Q = false, bad_P = false;
  double min_cost = std::numeric_limits<double>::infinity();
  std::vector<double> u(nu, 0.0);
  Box ubox = p.U;
  visit_lattice(p.Omega, per_axis, [&](std::span<const double> x) {
    auto finite = [&](const Expr& e) {
      try {
        return std::isfinite(e.eval(x, u));
      } catch (const DomainError&) {
        return false;
      }
    };
    for (std::size_t i = 0; i < nx; ++i) {
      if (!finite(p.f[i])) bad_f = true;
      for (std::size_t j = 0; j < nu; ++j)
        if (!finite(p.G[i][j])) bad_f = true;
    }
    if (p.Q && !finite(*p.Q)) bad_Q = true;
    if (p.P)
      for (const auto& row : *p.P)
        for (const auto& e : row)
          if (!finite(e)) bad_P = true;
    if (nu == 0) {
      if (!finite(p.q)) bad_q = true;
      else min_cost = std::min(min_cost, p.stage_cost(x, u));
      return;
    }
    visit_lattice(ubox, 2, [&](std::span<const double> uv) {
      try {
        double c = p.stage_cost(x, uv);
        if (!std::isfinite(c)) bad_q = true;
        else min_cost = std::min(min_cost, c);
      } catch (const DomainError&) {
        bad_q = true;
      }
    });
  });
  if (bad_f) add("drift or input map is not finite on the domain");
  if (bad_q) add("stage cost is not finite on the domain");
  if (bad_Q) add("Lyapunov function Q is not finite on the domain");
  if (bad_P) add("weight P is not finite on the domain");
  if (!bad_q && !std::isfinite(min_cost)) add("stage cost is not bounded below on the box");
  return rep;
}

}  // namespace otdp
