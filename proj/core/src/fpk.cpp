#include "otdp/fpk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "otdp/error.hpp"

namespace otdp {

SparseMatrix closed_loop_matrix(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback) {
  SparseMatrix N = sys.A;
  for (std::size_t c = 0; c < sys.B.size(); ++c) {
    const auto col = feedback.col(static_cast<Index>(c));
    Vector up = col.cwiseMax(0.0);
    Vector dn = (-col).cwiseMax(0.0);
    N += sys.B[c].fwd * up.asDiagonal();
    N += sys.B[c].bwd * dn.asDiagonal();
  }
  N.prune(0.0);
  N.makeCompressed();
  return N;
}

SparseMatrix closed_loop_generator(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback) {
  SparseMatrix L = (closed_loop_matrix(sys, feedback) - sys.E) / sys.h;
  L.prune(0.0);
  L.makeCompressed();
  return L;
}

DensityState steady_state(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback, double tol,
                          int max_iter) {
  const SparseMatrix N = closed_loop_matrix(sys, feedback);
  const double delta = 1e-7;
  SparseMatrix M = N - (1.0 + delta) * sys.E;
  M.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.analyzePattern(M);
  lu.factorize(M);
  if (lu.info() != Eigen::Success)
    throw LinearSolveFailure("factorization for the steady state failed: " + lu.lastErrorMessage());

  const Grid& g = sys.grid();
  Vector p = g.weights() / g.weights().sum();
  double change = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    Vector x = lu.solve(sys.E * p);
    const double s = x.sum();
    if (!x.allFinite() || s == 0.0) throw LinearSolveFailure("steady-state iteration broke down");
    x /= s;
    change = (x - p).cwiseAbs().maxCoeff();
    p = std::move(x);
    if (change <= tol) {
      return {p, 0.0};
    }
  }
  throw NoConvergence("steady-state iteration did not converge", max_iter, change);
}

double energy(const Vector& p, const Vector& p_inf) {
  double e = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double d = p[i] - p_inf[i];
    e += d * d / std::max(p_inf[i], 1e-300);
  }
  return e;
}

Propagation propagate(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback, const DensityState& p0,
                      const Vector& p_inf, long steps, long stride, bool check_positivity) {
  const SparseMatrix N = closed_loop_matrix(sys, feedback);
  Propagation out;
  Vector p = p0.p;
  double t = p0.time;
  out.trace.reserve(static_cast<std::size_t>(steps + 1));
  out.trace.push_back({t, energy(p, p_inf)});
  if (stride > 0) out.snapshots.push_back({p, t});
  const double mass0 = p.sum();
  for (long k = 1; k <= steps; ++k) {
    p = sys.solve(N * p);
    t = p0.time + static_cast<double>(k) * sys.h;
    if (check_positivity) {
      const double drift = std::abs(p.sum() - mass0);
      if (drift > 1e-10)
        throw PositivityViolation("mass drift " + std::to_string(drift) + " at step " + std::to_string(k));
      const double lo = p.minCoeff();
      if (lo < -1e-12)
        throw PositivityViolation("negative mass " + std::to_string(lo) + " at step " + std::to_string(k));
      p = p.cwiseMax(0.0);
    }
    const double e = energy(p, p_inf);
    const double inc = e - out.trace.back().E;
    if (inc > out.max_increase) out.max_increase = inc;
    if (inc > 1e-10) out.monotone = false;
    out.trace.push_back({t, e});
    if (stride > 0 && k % stride == 0) out.snapshots.push_back({p, t});
  }
  out.final_state = {p, t};
  return out;
}

double estimate_decay_rate(const EnergyTrace& trace, double window) {
  std::vector<EnergySample> s;
  for (const auto& e : trace)
    if (e.E > 1e-14) s.push_back(e);
  if (s.size() < 10)
    throw InsufficientData("decay-rate fit needs at least 10 samples with E > 1e-14, got " +
                           std::to_string(s.size()));
  window = std::clamp(window, 0.0, 1.0);
  const double t_end = s.back().t;
  const double t_start = t_end - window * (t_end - s.front().t);
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (const auto& e : s) {
    if (e.t < t_start) continue;
    const double y = 0.5 * std::log(e.E);
    n += 1;
    st += e.t;
    sy += y;
    stt += e.t * e.t;
    sty += e.t * y;
  }
  const double den = n * stt - st * st;
  if (n < 2 || den <= 0.0) throw InsufficientData("decay-rate window holds fewer than two samples");
  return -(n * sty - st * sy) / den;
}

double envelope_decay_rate(const EnergyTrace& trace) {
  if (trace.size() < 2 || !(trace.front().E > 0.0))
    throw InsufficientData("envelope fit needs a trace with E(0) > 0");
  const double t0 = trace.front().t;
  const double e0 = trace.front().E;
  double gamma = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < trace.size(); ++k) {
    if (!(trace[k].E > 1e-14)) continue;
    const double dt = trace[k].t - t0;
    if (dt <= 0.0) continue;
    gamma = std::min(gamma, -std::log(trace[k].E / e0) / (2.0 * dt));
  }
  if (!std::isfinite(gamma)) throw InsufficientData("envelope fit found no usable samples");
  return gamma;
}

namespace {

void orthonormalize(Eigen::MatrixXd& X, const Vector& kernel) {
  for (Index c = 0; c < X.cols(); ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      X.col(c) -= kernel.dot(X.col(c)) * kernel;
      for (Index d = 0; d < c; ++d) X.col(c) -= X.col(d).dot(X.col(c)) * X.col(d);
    }
    const double nrm = X.col(c).norm();
    if (nrm == 0.0) throw LinearSolveFailure("subspace iteration lost rank");
    X.col(c) /= nrm;
  }
}

}  // namespace

UniformRate uniform_decay_rate(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback,
                               const Vector& p_inf, double tol, int max_iter) {
  const Index m = sys.size();
  const SparseMatrix L = closed_loop_generator(sys, feedback);
  Vector sq(m), isq(m);
  for (Index i = 0; i < m; ++i) {
    const double v = std::max(p_inf[i], 1e-300);
    sq[i] = std::sqrt(v);
    isq[i] = 1.0 / sq[i];
  }
  const SparseMatrix T = isq.asDiagonal() * L * sq.asDiagonal();
  const SparseMatrix Tt = T.transpose();
  SparseMatrix S = -0.5 * (T + Tt);
  S.prune(0.0);

  double scale = 0.0;
  for (Index c = 0; c < S.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(S, c); it; ++it)
      if (it.row() == c) scale = std::max(scale, std::abs(it.value()));
  const double sigma = 1e-6 * std::max(scale, 1.0);
  SparseMatrix shifted = S;
  for (Index i = 0; i < m; ++i) shifted.coeffRef(i, i) += sigma;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw LinearSolveFailure("factorization of the symmetrized generator failed");

  const Vector kernel = sq / sq.norm();
  const Index k = std::min<Index>(6, m - 1);
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(m, k);
  for (Index c = 0; c < k; ++c)
    for (Index i = 0; i < m; ++i) X(i, c) = nd(rng);
  orthonormalize(X, kernel);

  UniformRate out;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::MatrixXd Y(m, k);
    for (Index c = 0; c < k; ++c) Y.col(c) = ldlt.solve(Vector(X.col(c)));
    orthonormalize(Y, kernel);
    Eigen::MatrixXd SY = S * Y;
    Eigen::MatrixXd H = Y.transpose() * SY;
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    X = Y * es.eigenvectors();
    const double theta = es.eigenvalues()[0];
    const Vector r = S * X.col(0) - theta * X.col(0);
    out.gamma = theta;
    out.iterations = it;
    if (r.norm() <= tol * std::max(1.0, std::abs(theta)) ||
        std::abs(theta - prev) <= 1e-14 * std::max(1.0, std::abs(theta)))
      break;
    prev = theta;
  }
  out.direction = sq.cwiseProduct(Vector(X.col(0)));
  return out;
}

double subdominant_rate(const DiscreteSystem& sys, const Eigen::MatrixXd& feedback, const Vector& p_inf,
                        int max_iter, double tol) {
  const SparseMatrix N = closed_loop_matrix(sys, feedback);
  const Index m = sys.size();
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  Vector x(m);
  for (Index i = 0; i < m; ++i) x[i] = ud(rng) * p_inf[i];
  x.array() -= x.sum() / static_cast<double>(m);
  x /= x.norm();
  // Rate from the norm growth over blocks of steps, which also handles a
  // complex subdominant pair.
  const int block = 50;
  double prev = std::numeric_limits<double>::infinity();
  double rate = 0.0;
  for (int it = 0; it < max_iter; it += block) {
    double logsum = 0.0;
    for (int b = 0; b < block; ++b) {
      x = sys.solve(N * x);
      x.array() -= x.sum() / static_cast<double>(m);
      const double nrm = x.norm();
      if (nrm == 0.0) return std::numeric_limits<double>::infinity();
      logsum += std::log(nrm);
      x /= nrm;
    }
    rate = -logsum / (block * sys.h);
    if (std::abs(rate - prev) <= tol * std::max(1.0, std::abs(rate))) break;
    prev = rate;
  }
  return rate;
}

double primal_cost(const Grid& g, const DualCost& dc, const Eigen::MatrixXd& feedback, const Vector& p) {
  const ProblemSpec& prob = dc.problem();
  double c = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    double l = dc.q()[i];
    for (int j = 0; j < prob.nu; ++j) l += 0.5 * prob.R[static_cast<std::size_t>(j)] * feedback(i, j) * feedback(i, j);
    c += l * p[i];
  }
  return c;
}

}  // namespace otdp
