#include <array>
#include <string>

#include "otdp/problem.hpp"

namespace otdp {

namespace {

Expr px(const char* s, int nx, int nu = 1) { return parse_expr(s, {nx, nu}); }

ProblemSpec one_dimensional(std::string name, const char* f, const char* g, const char* q, double R,
                            Interval U, Interval omega, double eps) {
  ProblemSpec p;
  p.name = std::move(name);
  p.nx = 1;
  p.nu = 1;
  p.f = {px(f, 1)};
  p.G = {{px(g, 1)}};
  p.q = px(q, 1);
  p.R = {R};
  p.U = {U};
  p.Omega = {omega};
  p.epsilon = eps;
  return p;
}

constexpr std::array<std::pair<ExampleId, std::string_view>, 4> kNames{{
    {ExampleId::LQG1D, "LQG1D"},
    {ExampleId::DoubleWell1D, "DoubleWell1D"},
    {ExampleId::CubicUncontrolled1D, "CubicUncontrolled1D"},
    {ExampleId::CaseStudy2D, "CaseStudy2D"},
}};

}  // namespace

ProblemSpec load_example(ExampleId id) {
  switch (id) {
    case ExampleId::LQG1D:
      // x' = x + u, cost x^2 + u^2, Riccati gain 1 + sqrt(2).
      return one_dimensional("LQG1D", "x1", "1", "x1^2", 2.0, {-10.0, 10.0}, {-4.0, 4.0}, 0.5);
    case ExampleId::DoubleWell1D: {
      ProblemSpec p = one_dimensional("DoubleWell1D", "x1/2 - x1^3", "0", "x1^2", 1.0,
                                      {-1.0, 1.0}, {-3.0, 3.0}, 1.0);
      p.P = std::vector<std::vector<Expr>>{{px("1 - 0.5*exp(-x1^2)", 1)}};
      return p;
    }
    case ExampleId::CubicUncontrolled1D: {
      ProblemSpec p = one_dimensional("CubicUncontrolled1D", "x1 - x1^3", "0", "x1^2 + x1^4", 2.0,
                                      {-1.0, 1.0}, {-3.0, 3.0}, 1.0);
      p.Q = px("0.5*x1^2", 1);
      return p;
    }
    case ExampleId::CaseStudy2D: {
      ProblemSpec p;
      p.name = "CaseStudy2D";
      p.nx = 2;
      p.nu = 1;
      p.f = {px("x2 - 0.5*x1*x2", 2), px("-x1", 2)};
      p.G = {{px("0", 2)}, {px("1", 2)}};
      p.q = px("0.25*x1^2 + 3*(x2^2 - 1)^2", 2);
      p.R = {1.0};
      p.U = {{-4.0, 4.0}};
      p.Omega = {{-3.0, 3.0}, {-3.0, 3.0}};
      p.epsilon = 0.2;
      return p;
    }
  }
  return {};
}

std::string_view to_string(ExampleId id) {
  for (const auto& [k, name] : kNames)
    if (k == id) return name;
  return "?";
}

std::optional<ExampleId> parse_example_id(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  return std::nullopt;
}

std::vector<ExampleId> all_examples() {
  std::vector<ExampleId> out;
  for (const auto& kv : kNames) out.push_back(kv.first);
  return out;
}

}  // namespace otdp
