#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "otdp/analysis.hpp"
#include "otdp/error.hpp"

using namespace otdp;

TEST(Analysis, HasminskiiCubicExample) {
  const ProblemSpec p = load_example(ExampleId::CubicUncontrolled1D);
  const Grid g(p.Omega, {601});
  LyapunovGammas gm;
  gm.gamma1 = 1.0;
  gm.gamma2 = 1.0;
  gm.gamma3 = 1.0;
  gm.gamma4 = 0.25;
  const LyapunovCheck c = check_hasminskii(p, zero_feedback(1), g, gm);
  EXPECT_TRUE(c.passed);
  // Margin 1 - x^2/4 - x^4/4 - (x - x^3) x = 1 - 5x^2/4 + 3x^4/4, minimal at x^2 = 5/6.
  const double exact = 1.0 - 25.0 / 48.0;
  EXPECT_NEAR(c.margin, exact, 1e-4);
  EXPECT_NEAR(c.min_hessian_eigenvalue, 1.0, 1e-5);
  EXPECT_NEAR(c.max_hessian_eigenvalue, 1.0, 1e-5);
  EXPECT_NEAR(c.min_boundary_flux, 3.0, 1e-6);  // Q'(3) * n
  EXPECT_TRUE(c.drift_violations.empty());
}

TEST(Analysis, HasminskiiFailsForLargeCostWeight) {
  const ProblemSpec p = load_example(ExampleId::CubicUncontrolled1D);
  const Grid g(p.Omega, {201});
  LyapunovGammas gm;
  gm.gamma4 = 5.0;
  const LyapunovCheck c = check_hasminskii(p, zero_feedback(1), g, gm);
  EXPECT_FALSE(c.passed);
  EXPECT_LT(c.margin, 0.0);
  EXPECT_FALSE(c.drift_violations.empty());
}

TEST(Analysis, HasminskiiConcaveQFails) {
  ProblemSpec p = load_example(ExampleId::CaseStudy2D);
  p.Q = parse_expr("-0.5*(x1^2 + x2^2)", {2, 1});
  const Grid g(p.Omega, {21, 21});
  LyapunovGammas gm;
  gm.gamma1 = 1.0;
  gm.gamma2 = 1.0;
  const LyapunovCheck c = check_hasminskii(p, zero_feedback(1), g, gm);
  EXPECT_FALSE(c.passed);
  EXPECT_NEAR(c.min_hessian_eigenvalue, -1.0, 1e-5);
  EXPECT_EQ(c.hessian_violations.size(), static_cast<std::size_t>(g.size()));
  EXPECT_FALSE(c.boundary_violations.empty());
}

TEST(Analysis, HasminskiiQuadraticHessianBounds) {
  ProblemSpec p = load_example(ExampleId::CaseStudy2D);
  p.Q = parse_expr("0.5*(x1^2 + x2^2)", {2, 1});
  const Grid g(p.Omega, {21, 21});
  LyapunovGammas gm;
  gm.gamma1 = 1.0;
  gm.gamma2 = 1.0;
  const LyapunovCheck c = check_hasminskii(p, zero_feedback(1), g, gm);
  EXPECT_TRUE(c.hessian_violations.empty());
  EXPECT_TRUE(c.boundary_violations.empty());
  EXPECT_NEAR(c.min_boundary_flux, 3.0, 1e-6);
}

TEST(Analysis, HasminskiiNeedsQ) {
  const ProblemSpec p = load_example(ExampleId::CaseStudy2D);
  const Grid g(p.Omega, {5, 5});
  EXPECT_THROW(check_hasminskii(p, zero_feedback(1), g, {}), MissingData);
}

TEST(Analysis, BakryEmeryDoubleWell) {
  const ProblemSpec p = load_example(ExampleId::DoubleWell1D);
  const Grid g(p.Omega, {601});
  BakryEmeryOptions opt;
  opt.lambda = 1.0 / 20.0;
  opt.lambda_lower = 0.5;
  opt.lambda_upper = 1.0;
  const BakryEmeryCheck c = check_bakry_emery(p, zero_feedback(1), *p.P, g, opt);
  EXPECT_TRUE(c.passed);
  EXPECT_EQ(c.gamma, 0.05);
  EXPECT_TRUE(c.flagged_nodes.empty());
  // Hand evaluation at x = 0: P = 1/2, P' = 0, P'' = 1, f' = 1/2, so
  // R P = (eps P'' + f P' - 2 f' P) / 2 = 1/4 and the block is
  // diag(1/4 - lambda/2, eps P) = diag(0.225, 0.5).
  EXPECT_NEAR(c.node_min_eigenvalue[300], 0.225, 1e-6);
  EXPECT_GT(c.min_eigenvalue, 0.0);
  EXPECT_NEAR(c.grid_lambda_lower, 0.5, 1e-12);
  EXPECT_NEAR(c.grid_lambda_upper, 1.0 - 0.5 * std::exp(-9.0), 1e-12);
}

TEST(Analysis, BakryEmeryGridDerivedBounds) {
  const ProblemSpec p = load_example(ExampleId::DoubleWell1D);
  const Grid g(p.Omega, {201});
  BakryEmeryOptions opt;
  opt.lambda = 0.05;
  const BakryEmeryCheck c = check_bakry_emery(p, zero_feedback(1), *p.P, g, opt);
  EXPECT_TRUE(c.passed);
  EXPECT_NEAR(c.gamma, 0.1 * 0.5 / (1.0 - 0.5 * std::exp(-9.0)), 1e-12);
}

TEST(Analysis, BakryEmeryFailsForLargeLambda) {
  const ProblemSpec p = load_example(ExampleId::DoubleWell1D);
  const Grid g(p.Omega, {201});
  BakryEmeryOptions opt;
  opt.lambda = 5.0;
  const BakryEmeryCheck c = check_bakry_emery(p, zero_feedback(1), *p.P, g, opt);
  EXPECT_FALSE(c.passed);
  EXPECT_LT(c.min_eigenvalue, 0.0);
}

TEST(Analysis, BakryEmeryRejectsIndefiniteWeight) {
  const ProblemSpec p = load_example(ExampleId::DoubleWell1D);
  const Grid g(p.Omega, {51});
  const std::vector<std::vector<Expr>> P{{parse_expr("x1", {1, 1})}};
  EXPECT_THROW(check_bakry_emery(p, zero_feedback(1), P, g, {}), PNotPositive);
}

TEST(Analysis, BakryEmeryRejectsWrongBounds) {
  const ProblemSpec p = load_example(ExampleId::DoubleWell1D);
  const Grid g(p.Omega, {51});
  BakryEmeryOptions opt;
  opt.lambda = 0.05;
  opt.lambda_lower = 0.7;  // P(0) = 0.5 lies below
  opt.lambda_upper = 1.0;
  EXPECT_FALSE(check_bakry_emery(p, zero_feedback(1), *p.P, g, opt).passed);
}

TEST(Analysis, TableFeedbackInterpolatesAndClamps) {
  auto g = std::make_shared<const Grid>(Box{{0.0, 1.0}}, std::vector<int>{3});
  Eigen::MatrixXd t(3, 1);
  t << 0.0, 1.0, 0.0;
  const FeedbackFn mu = table_feedback(g, t);
  std::vector<double> u(1);
  mu(std::vector<double>{0.25}, u);
  EXPECT_DOUBLE_EQ(u[0], 0.5);
  mu(std::vector<double>{1.0 + 1e-9}, u);
  EXPECT_DOUBLE_EQ(u[0], 0.0);
}

TEST(Analysis, DualityReport) {
  const DualityReport r = duality_report(2.0, 2.01);
  EXPECT_NEAR(r.absolute_gap, 0.01, 1e-15);
  EXPECT_NEAR(r.relative_gap, 0.005, 1e-15);
  EXPECT_EQ(duality_report(1.5, 1.5).absolute_gap, 0.0);
}

TEST(Analysis, ConservationOnCaseStudy) {
  const ProblemSpec p = load_example(ExampleId::CaseStudy2D);
  auto g = std::make_shared<const Grid>(p.Omega, std::vector<int>{20, 20});
  const DiscreteSystem sys = discretize_substepped(assemble_generator(p, *g), g, p.U, 0.05).sys;
  const ConservationCheck c = check_conservation(sys, 200, 4);
  EXPECT_TRUE(c.passed);
  EXPECT_EQ(c.samples, 200);
  EXPECT_LE(c.max_mass_drift, 1e-10);
  EXPECT_GE(c.min_component, -1e-12);
}

TEST(Analysis, ConservationDetectsNonMonotoneScheme) {
  const ProblemSpec p = load_example(ExampleId::CaseStudy2D);
  auto g = std::make_shared<const Grid>(p.Omega, std::vector<int>{10, 10});
  const Generator gen = assemble_generator(p, *g, {DriftFlux::Upwind, ControlFlux::Central});
  const DiscreteSystem sys = discretize_time(gen, g, p.U, 0.05, false);
  const ConservationCheck c = check_conservation(sys, 200, 4);
  EXPECT_LT(c.min_component, -1e-12);
  EXPECT_FALSE(c.passed);
}
