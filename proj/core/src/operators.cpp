#include "otdp/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "otdp/error.hpp"

namespace otdp {

using Triplets = std::vector<Eigen::Triplet<double>>;

std::string_view to_string(DriftFlux f) { return f == DriftFlux::Upwind ? "upwind" : "fitted"; }

std::string_view to_string(ControlFlux f) {
  switch (f) {
    case ControlFlux::Upwind: return "upwind";
    case ControlFlux::Hybrid: return "hybrid";
    case ControlFlux::Central: return "central";
  }
  return "?";
}

DriftFlux parse_drift_flux(std::string_view s) {
  if (s == "upwind") return DriftFlux::Upwind;
  if (s == "fitted") return DriftFlux::Fitted;
  throw ConfigError("drift_flux must be \"upwind\" or \"fitted\", got \"" + std::string(s) + "\"");
}

ControlFlux parse_control_flux(std::string_view s) {
  if (s == "upwind") return ControlFlux::Upwind;
  if (s == "hybrid") return ControlFlux::Hybrid;
  if (s == "central") return ControlFlux::Central;
  throw ConfigError("control_flux must be \"upwind\", \"hybrid\" or \"central\", got \"" +
                    std::string(s) + "\"");
}

namespace {

// z / (exp(z) - 1)
double bernoulli(double z) {
  if (std::abs(z) < 1e-10) return 1.0 - 0.5 * z;
  return z / std::expm1(z);
}

// Face between i (lower) and j (upper) carrying density flux
// S * (alpha * rho_i - beta * rho_j) from i to j.
void add_face(Triplets& t, Index i, Index j, double w_i, double w_j, double S, double alpha,
              double beta) {
  if (alpha != 0.0) {
    t.emplace_back(i, i, -S * alpha / w_i);
    t.emplace_back(j, i, S * alpha / w_i);
  }
  if (beta != 0.0) {
    t.emplace_back(i, j, S * beta / w_j);
    t.emplace_back(j, j, -S * beta / w_j);
  }
}

SparseMatrix from_triplets(Index n, const Triplets& t) {
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

double checked_eval(const Expr& e, std::span<const double> x, std::span<const double> u,
                    const char* what) {
  double v;
  try {
    v = e.eval(x, u);
  } catch (const DomainError& err) {
    throw AssemblyError(std::string(what) + " evaluation failed at a face midpoint: " + err.what());
  }
  if (!std::isfinite(v)) throw AssemblyError(std::string(what) + " is not finite at a face midpoint");
  return v;
}

}  // namespace

Generator assemble_generator(const ProblemSpec& p, const Grid& g, const AssemblyOptions& opt) {
  const int n = g.dim();
  const int nu = p.nu;
  const Index m = g.size();
  if (n != p.nx) throw AssemblyError("grid dimension does not match the state dimension");
  const Eigen::VectorXd& w = g.weights();
  const double eps = p.epsilon;

  std::vector<double> umax(static_cast<std::size_t>(nu));
  for (int j = 0; j < nu; ++j)
    umax[static_cast<std::size_t>(j)] =
        std::max(std::abs(p.U[static_cast<std::size_t>(j)].lo), std::abs(p.U[static_cast<std::size_t>(j)].hi));

  Triplets ta, tk;
  std::vector<Triplets> tf(static_cast<std::size_t>(nu)), tb(static_cast<std::size_t>(nu));
  ta.reserve(static_cast<std::size_t>(m) * 4 * n);

  Generator gen;
  std::vector<double> x(static_cast<std::size_t>(n)), zero_u(static_cast<std::size_t>(nu), 0.0);
  std::vector<double> a(static_cast<std::size_t>(nu));

  for (Index i = 0; i < m; ++i) {
    g.node(i, x);
    for (int k = 0; k < n; ++k) {
      if (g.axis_index(i, k) == g.count(k) - 1) continue;
      const Index j = i + g.stride(k);
      const double hk = g.spacing(k);

      double S = 1.0;
      for (int b = 0; b < n; ++b) {
        if (b == k) continue;
        int ib = g.axis_index(i, b);
        S *= (ib == 0 || ib == g.count(b) - 1) ? 0.5 * g.spacing(b) : g.spacing(b);
      }

      const double xk = x[static_cast<std::size_t>(k)];
      x[static_cast<std::size_t>(k)] = xk + 0.5 * hk;
      const double fk = checked_eval(p.f[static_cast<std::size_t>(k)], x, zero_u, "drift");
      for (int c = 0; c < nu; ++c)
        a[static_cast<std::size_t>(c)] =
            checked_eval(p.G[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)], x, zero_u, "input map");
      x[static_cast<std::size_t>(k)] = xk;

      double alpha, beta;
      if (opt.drift == DriftFlux::Upwind) {
        alpha = eps / hk + std::max(fk, 0.0);
        beta = eps / hk + std::max(-fk, 0.0);
      } else {
        const double pe = fk * hk / eps;
        alpha = eps / hk * bernoulli(-pe);
        beta = eps / hk * bernoulli(pe);
      }
      add_face(ta, i, j, w[i], w[j], S, alpha, beta);

      double kappa = 0.0;
      for (int c = 0; c < nu; ++c) kappa += 0.5 * std::abs(a[static_cast<std::size_t>(c)]) * umax[static_cast<std::size_t>(c)];
      if (kappa == 0.0) continue;

      bool centered = opt.control == ControlFlux::Central ||
                      (opt.control == ControlFlux::Hybrid && std::min(alpha, beta) >= kappa);
      if (centered) {
        ++gen.centered_faces;
        add_face(tk, i, j, w[i], w[j], S, kappa, kappa);
        for (int c = 0; c < nu; ++c) {
          const double ac = a[static_cast<std::size_t>(c)];
          add_face(tf[static_cast<std::size_t>(c)], i, j, w[i], w[j], S, 0.5 * ac, -0.5 * ac);
          add_face(tb[static_cast<std::size_t>(c)], i, j, w[i], w[j], S, -0.5 * ac, 0.5 * ac);
        }
      } else {
        ++gen.upwind_faces;
        for (int c = 0; c < nu; ++c) {
          const double ac = a[static_cast<std::size_t>(c)];
          add_face(tf[static_cast<std::size_t>(c)], i, j, w[i], w[j], S, std::max(ac, 0.0), std::max(-ac, 0.0));
          add_face(tb[static_cast<std::size_t>(c)], i, j, w[i], w[j], S, std::max(-ac, 0.0), std::max(ac, 0.0));
        }
      }
    }
  }

  gen.A = from_triplets(m, ta);
  gen.K = from_triplets(m, tk);
  gen.B.resize(static_cast<std::size_t>(nu));
  for (int c = 0; c < nu; ++c) {
    gen.B[static_cast<std::size_t>(c)].fwd = from_triplets(m, tf[static_cast<std::size_t>(c)]);
    gen.B[static_cast<std::size_t>(c)].bwd = from_triplets(m, tb[static_cast<std::size_t>(c)]);
  }
  return gen;
}

namespace {

// Signed parts (u+, u-) at the extreme points of an interval.
std::vector<std::pair<double, double>> extreme_parts(const Interval& U) {
  std::vector<std::pair<double, double>> out;
  auto push = [&](double u) { out.emplace_back(std::max(u, 0.0), std::max(-u, 0.0)); };
  push(U.lo);
  push(U.hi);
  if (U.lo < 0.0 && U.hi > 0.0) push(0.0);
  return out;
}

}  // namespace

double max_positive_step(const Generator& gen, const Box& U) {
  const Index m = gen.A.rows();
  const std::size_t nu = gen.B.size();
  std::vector<std::vector<std::pair<double, double>>> ext(nu);
  for (std::size_t c = 0; c < nu; ++c) ext[c] = extreme_parts(U[c]);

  double hmax = std::numeric_limits<double>::infinity();
  std::vector<std::pair<Index, double>> acc;
  struct Entry {
    Index row;
    double f, b;
  };
  std::vector<Entry> fb;
  for (Index col = 0; col < m; ++col) {
    acc.clear();
    for (SparseMatrix::InnerIterator it(gen.K, col); it; ++it) acc.emplace_back(it.row(), it.value());
    for (std::size_t c = 0; c < nu; ++c) {
      fb.clear();
      for (SparseMatrix::InnerIterator it(gen.B[c].fwd, col); it; ++it) fb.push_back({it.row(), it.value(), 0.0});
      for (SparseMatrix::InnerIterator it(gen.B[c].bwd, col); it; ++it) {
        auto pos = std::find_if(fb.begin(), fb.end(), [&](const Entry& e) { return e.row == it.row(); });
        if (pos == fb.end())
          fb.push_back({it.row(), 0.0, it.value()});
        else
          pos->b = it.value();
      }
      for (const Entry& e : fb) {
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& [up, dn] : ext[c]) worst = std::min(worst, e.f * up + e.b * dn);
        acc.emplace_back(e.row, worst);
      }
    }
    std::sort(acc.begin(), acc.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    double scale = 0.0;
    for (const auto& e : acc) scale = std::max(scale, std::abs(e.second));
    for (std::size_t k = 0; k < acc.size();) {
      Index r = acc[k].first;
      double v = 0.0;
      for (; k < acc.size() && acc[k].first == r; ++k) v += acc[k].second;
      if (r == col) {
        if (v < 0.0) hmax = std::min(hmax, -1.0 / v);
      } else if (v < -1e-12 * std::max(scale, 1.0)) {
        return 0.0;
      }
    }
  }
  return hmax;
}

DiscreteSystem discretize_time(const Generator& gen, std::shared_ptr<const Grid> grid, const Box& U,
                               double h, bool enforce_positivity) {
  if (!(h > 0.0) || !std::isfinite(h)) throw AssemblyError("time step must be positive");
  const Index m = gen.A.rows();
  if (enforce_positivity) {
    const double hmax = max_positive_step(gen, U);
    if (h > hmax * (1.0 + 1e-12)) throw StepTooLarge(h, hmax);
    SparseMatrix off = gen.A - gen.K;
    for (Index col = 0; col < m; ++col)
      for (SparseMatrix::InnerIterator it(off, col); it; ++it)
        if (it.row() != col && it.value() < 0.0)
          throw AssemblyError("implicit part is not an M-matrix; use a monotone control flux");
  }

  SparseMatrix I(m, m);
  I.setIdentity();
  DiscreteSystem sys;
  sys.E = I - h * (gen.A - gen.K);
  sys.A = I + h * gen.K;
  sys.E.prune(0.0);
  sys.A.prune(0.0);
  sys.E.makeCompressed();
  sys.A.makeCompressed();
  sys.B.resize(gen.B.size());
  for (std::size_t c = 0; c < gen.B.size(); ++c) {
    sys.B[c].fwd = h * gen.B[c].fwd;
    sys.B[c].bwd = h * gen.B[c].bwd;
  }
  sys.h = h;
  sys.U = U;
  sys.grid_ = std::move(grid);
  sys.lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
  sys.lu_->analyzePattern(sys.E);
  sys.lu_->factorize(sys.E);
  if (sys.lu_->info() != Eigen::Success)
    throw LinearSolveFailure("factorization of E failed: " + sys.lu_->lastErrorMessage());
  return sys;
}

SubsteppedSystem discretize_substepped(const Generator& gen, std::shared_ptr<const Grid> grid,
                                       const Box& U, double h, bool enforce_positivity) {
  SubsteppedSystem out;
  out.h = h;
  out.h_max = max_positive_step(gen, U);
  if (out.h_max > 0.0 && h > out.h_max)
    out.substeps = static_cast<int>(std::ceil(h / out.h_max * (1.0 - 1e-12)));
  out.sys = discretize_time(gen, std::move(grid), U, h / out.substeps, enforce_positivity);
  return out;
}

Vector DiscreteSystem::solve(const Vector& rhs) const {
  Vector x = lu_->solve(rhs);
  if (!x.allFinite()) throw LinearSolveFailure("solve with E produced non-finite values");
  return x;
}

Vector DiscreteSystem::solve_transpose(const Vector& rhs) const {
  Vector x = lu_->transpose().solve(rhs);
  if (!x.allFinite()) throw LinearSolveFailure("solve with E' produced non-finite values");
  return x;
}

Vector DiscreteSystem::explicit_part(const Vector& p, const Eigen::MatrixXd& u) const {
  Vector r = A * p;
  for (std::size_t c = 0; c < B.size(); ++c) {
    const auto col = u.col(static_cast<Index>(c));
    Vector vp = p.cwiseProduct(col.cwiseMax(0.0));
    Vector vm = p.cwiseProduct((-col).cwiseMax(0.0));
    r += B[c].fwd * vp + B[c].bwd * vm;
  }
  return r;
}

Vector step_unchecked(const DiscreteSystem& sys, const Vector& p, const Eigen::MatrixXd& u) {
  return sys.solve(sys.explicit_part(p, u));
}

Vector apply_step(const DiscreteSystem& sys, const Vector& p, const Eigen::MatrixXd& u) {
  Vector next = step_unchecked(sys, p, u);
  const double drift = std::abs(next.sum() - p.sum());
  if (drift > 1e-10)
    throw PositivityViolation("mass conservation violated by " + std::to_string(drift));
  for (Index i = 0; i < next.size(); ++i) {
    if (next[i] < 0.0) {
      if (next[i] < -1e-12)
        throw PositivityViolation("negative mass " + std::to_string(next[i]) + " at node " + std::to_string(i));
      next[i] = 0.0;
    }
  }
  return next;
}

void dump_system(const DiscreteSystem& sys, std::ostream& out) {
  auto dump = [&](const char* name, const SparseMatrix& M) {
    out << "# " << name << ' ' << M.rows() << ' ' << M.cols() << ' ' << M.nonZeros() << '\n';
    for (Index col = 0; col < M.outerSize(); ++col)
      for (SparseMatrix::InnerIterator it(M, col); it; ++it)
        out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
  };
  auto old = out.precision(17);
  dump("E", sys.E);
  dump("A", sys.A);
  for (std::size_t c = 0; c < sys.B.size(); ++c) {
    dump(("B" + std::to_string(c + 1) + "_fwd").c_str(), sys.B[c].fwd);
    dump(("B" + std::to_string(c + 1) + "_bwd").c_str(), sys.B[c].bwd);
  }
  out.precision(old);
}

}  // namespace otdp
