#include "otdp_cli/pipeline.hpp"

#include <chrono>

namespace otdp::cli {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Pipeline build_pipeline(const RunConfig& cfg) {
  Pipeline pl;
  pl.cfg = cfg;
  auto t0 = std::chrono::steady_clock::now();
  pl.grid = std::make_shared<const Grid>(cfg.problem.Omega, cfg.solver.grid);
  pl.gen = assemble_generator(cfg.problem, *pl.grid, cfg.solver.flux);
  pl.assemble_seconds = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  pl.stepped = discretize_substepped(pl.gen, pl.grid, cfg.problem.U, cfg.solver.h, cfg.solver.enforce_positivity);
  pl.dual = std::make_shared<const DualCost>(cfg.problem, *pl.grid);
  pl.discretize_seconds = seconds_since(t0);
  return pl;
}

ErgodicOptions ergodic_options(const Pipeline& pl) {
  ErgodicOptions opt;
  opt.tol = pl.cfg.solver.tol;
  opt.offset_tol = pl.cfg.solver.offset_tol;
  opt.anchor = pl.cfg.solver.anchor;
  opt.max_iter = pl.cfg.solver.max_iter;
  opt.substeps = pl.stepped.substeps;
  return opt;
}

ErgodicRun run_ergodic(const Pipeline& pl, const ErgodicOptions& opt) {
  ErgodicRun r;
  auto t0 = std::chrono::steady_clock::now();
  r.sol = solve_ergodic(pl.sys(), *pl.dual, opt);
  r.solve_seconds = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  r.steady = steady_state(pl.sys(), r.sol.mu_inf);
  r.steady_seconds = seconds_since(t0);
  return r;
}

}  // namespace otdp::cli
