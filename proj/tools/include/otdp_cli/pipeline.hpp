#pragma once

#include <memory>
#include <optional>

#include "otdp/config.hpp"
#include "otdp/conjugate.hpp"
#include "otdp/dp.hpp"
#include "otdp/fpk.hpp"
#include "otdp/operators.hpp"

namespace otdp::cli {

/// Assembled and time-discretized problem, ready for the DP solvers.
struct Pipeline {
  RunConfig cfg;
  std::shared_ptr<const Grid> grid;
  Generator gen;
  SubsteppedSystem stepped;
  std::shared_ptr<const DualCost> dual;
  double assemble_seconds = 0.0;
  double discretize_seconds = 0.0;

  const DiscreteSystem& sys() const { return stepped.sys; }
};

Pipeline build_pipeline(const RunConfig& cfg);

ErgodicOptions ergodic_options(const Pipeline& pl);

/// Ergodic solve plus the closed-loop steady state.
struct ErgodicRun {
  ErgodicSolution sol;
  DensityState steady;
  double solve_seconds = 0.0;
  double steady_seconds = 0.0;
};

ErgodicRun run_ergodic(const Pipeline& pl, const ErgodicOptions& opt);

}  // namespace otdp::cli
