#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "otdp/grid.hpp"
#include "otdp/problem.hpp"

namespace otdp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

/// Face flux for the drift part of the generator.
enum class DriftFlux {
  Upwind,  // donor cell on the face-midpoint drift, first order
  Fitted,  // exponential (Scharfetter-Gummel) fitting of drift and diffusion
};

/// Face flux for the control transport.
enum class ControlFlux {
  Upwind,   // donor cell
  Hybrid,   // centered where the face diffusion dominates max|G u|/2, donor cell elsewhere
  Central,  // centered everywhere
};

std::string_view to_string(DriftFlux f);
std::string_view to_string(ControlFlux f);
DriftFlux parse_drift_flux(std::string_view s);
ControlFlux parse_control_flux(std::string_view s);

struct AssemblyOptions {
  DriftFlux drift = DriftFlux::Upwind;
  ControlFlux control = ControlFlux::Hybrid;
};

/// Transport of one input channel. The channel velocity is G_j u_j; with
/// u = u+ - u- the mass flux splits into `fwd * (u+ p) + bwd * (u- p)`, each
/// half discretized for its own direction. On centered faces bwd = -fwd.
struct ControlChannel {
  SparseMatrix fwd;
  SparseMatrix bwd;
};

/// Continuous-time generator in mass representation.
struct Generator {
  SparseMatrix A;                        // -div(f p) + eps Lap p, no flux at the boundary
  std::vector<ControlChannel> B;         // -div(G_j u_j p), one per input
  SparseMatrix K;                        // compensating diffusion on centered control faces
  Index centered_faces = 0;
  Index upwind_faces = 0;
};

Generator assemble_generator(const ProblemSpec& p, const Grid& g, const AssemblyOptions& opt = {});

/// Discrete-time triple: E p' = A p + sum_j (Bf_j (u+ p) + Bb_j (u- p)).
///
/// E = I - h (A_c - K), A = I + h K, B = h B_c. E is factored once; the
/// factorization is only read by solves, which may run concurrently.
class DiscreteSystem {
 public:
  SparseMatrix E;
  SparseMatrix A;
  std::vector<ControlChannel> B;
  double h = 0.0;
  Box U;
  std::string representation = "mass";

  const Grid& grid() const { return *grid_; }
  std::shared_ptr<const Grid> grid_ptr() const { return grid_; }
  Index size() const { return E.rows(); }
  int inputs() const { return static_cast<int>(B.size()); }

  Vector solve(const Vector& rhs) const;            // E x = rhs
  Vector solve_transpose(const Vector& rhs) const;  // E' x = rhs

  /// A p + sum of control terms for per-node controls `u` (node-major,
  /// size() x inputs()).
  Vector explicit_part(const Vector& p, const Eigen::MatrixXd& u) const;

 private:
  friend DiscreteSystem discretize_time(const Generator&, std::shared_ptr<const Grid>, const Box&,
                                        double, bool);
  std::shared_ptr<const Grid> grid_;
  std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
};

/// Largest step for which the explicit part maps nonnegative masses to
/// nonnegative masses for every control in U. Zero when some off-diagonal
/// entry has the wrong sign independently of the step.
double max_positive_step(const Generator& gen, const Box& U);

/// Builds (E, A, B). When `enforce_positivity` is set, throws StepTooLarge if
/// h exceeds max_positive_step, and AssemblyError if E is not an M-matrix.
DiscreteSystem discretize_time(const Generator& gen, std::shared_ptr<const Grid> grid, const Box& U,
                               double h, bool enforce_positivity = true);

/// A requested step h realized as `substeps` steps of length h / substeps,
/// each within max_positive_step (which also bounds the explicit control
/// part when the positivity checks are off).
struct SubsteppedSystem {
  DiscreteSystem sys;
  double h = 0.0;
  int substeps = 1;
  double h_max = 0.0;
};

SubsteppedSystem discretize_substepped(const Generator& gen, std::shared_ptr<const Grid> grid,
                                       const Box& U, double h, bool enforce_positivity = true);

/// One step E p' = A p + B v with per-node controls u (v = u p). Checks mass
/// conservation to 1e-10, clips entries in [-1e-12, 0) to zero and throws
/// PositivityViolation for anything more negative.
Vector apply_step(const DiscreteSystem& sys, const Vector& p, const Eigen::MatrixXd& u);

/// Same step without the checks.
Vector step_unchecked(const DiscreteSystem& sys, const Vector& p, const Eigen::MatrixXd& u);

/// Coordinate text dump (row col value, one-based) of E, A and each B block.
void dump_system(const DiscreteSystem& sys, std::ostream& out);

}  // namespace otdp
