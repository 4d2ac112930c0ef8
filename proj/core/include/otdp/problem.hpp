#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otdp/expr.hpp"

namespace otdp {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
};

using Box = std::vector<Interval>;

/// Continuous-time problem: dX = (f + G u) dt + sqrt(2 eps) dW reflected at
/// the boundary of the box Omega, stage cost q(x) + 1/2 u'Ru with R diagonal,
/// u restricted to the box U.
struct ProblemSpec {
  std::string name;
  int nx = 0;
  int nu = 0;
  std::vector<Expr> f;               // nx entries
  std::vector<std::vector<Expr>> G;  // G[i][j]: state component i, input j
  Expr q;
  std::vector<double> R;             // diagonal, nu entries
  Box U;
  Box Omega;
  double epsilon = 0.0;
  std::optional<Expr> Q;                               // Lyapunov function
  std::optional<std::vector<std::vector<Expr>>> P;     // nx-by-nx weight

  VariableSet vars() const noexcept { return {nx, nu}; }

  double stage_cost(std::span<const double> x, std::span<const double> u) const;
  /// f(x) + G(x) u, written to `out` (nx entries).
  void closed_loop_drift(std::span<const double> x, std::span<const double> u,
                         std::span<double> out) const;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// Checks the structural invariants and samples q, f, G (and Q, P when
/// present) on a coarse lattice of Omega to confirm they are finite and that
/// the stage cost is bounded below on the box.
ValidationReport validate_spec(const ProblemSpec& p);

enum class ExampleId { LQG1D, DoubleWell1D, CubicUncontrolled1D, CaseStudy2D };

ProblemSpec load_example(ExampleId id);
std::string_view to_string(ExampleId id);
std::optional<ExampleId> parse_example_id(std::string_view name);
std::vector<ExampleId> all_examples();

}  // namespace otdp
