#include <memory>

#include <benchmark/benchmark.h>

#include "otdp/dp.hpp"
#include "otdp/sde.hpp"

using namespace otdp;

namespace {

struct CaseStudy {
  ProblemSpec p = load_example(ExampleId::CaseStudy2D);
  std::shared_ptr<const Grid> g;
  DiscreteSystem sys;
  std::unique_ptr<DualCost> dc;

  explicit CaseStudy(int side) {
    g = std::make_shared<const Grid>(p.Omega, std::vector<int>{side, side});
    sys = discretize_substepped(assemble_generator(p, *g, {DriftFlux::Fitted, ControlFlux::Hybrid}), g, p.U, 0.05).sys;
    dc = std::make_unique<DualCost>(p, *g);
  }
};

// m = side^2 nodes
void BM_Assemble(benchmark::State& st) {
  const ProblemSpec p = load_example(ExampleId::CaseStudy2D);
  const Grid g(p.Omega, {static_cast<int>(st.range(0)), static_cast<int>(st.range(0))});
  for (auto _ : st) benchmark::DoNotOptimize(assemble_generator(p, g, {DriftFlux::Fitted, ControlFlux::Hybrid}));
}

void BM_DpStep(benchmark::State& st) {
  const CaseStudy cs(static_cast<int>(st.range(0)));
  Vector y = Vector::Zero(cs.sys.size());
  for (auto _ : st) {
    y = dp_step(cs.sys, *cs.dc, y).y;
    y.array() -= y[0];
  }
}

// N = 1000 backward steps
void BM_FiniteHorizon(benchmark::State& st) {
  const CaseStudy cs(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(solve_finite_horizon(cs.sys, *cs.dc, 1000, false));
  st.counters["h"] = cs.sys.h;
}

void BM_Simulate(benchmark::State& st) {
  const CaseStudy cs(30);
  const Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cs.sys.size(), 1);
  SimConfig c;
  c.trajectories = 4;
  c.T = 100.0;
  for (auto _ : st) benchmark::DoNotOptimize(simulate(cs.p, *cs.g, fb, c));
}

}  // namespace

BENCHMARK(BM_Assemble)->Arg(10)->Arg(20)->Arg(30)->Arg(150)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DpStep)->Arg(10)->Arg(20)->Arg(30)->Arg(150)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FiniteHorizon)->Arg(10)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
