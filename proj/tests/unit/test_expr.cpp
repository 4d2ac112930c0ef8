#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "otdp/error.hpp"
#include "otdp/expr.hpp"

using otdp::Expr;
using otdp::parse_expr;
using Op = otdp::Expr::Op;

namespace {

double ev(const char* s, std::vector<double> x = {}, std::vector<double> u = {}) {
  return parse_expr(s, {static_cast<int>(std::max<std::size_t>(x.size(), 2)), static_cast<int>(u.size())})
      .eval(x, u);
}

}  // namespace

TEST(Expr, CubicDriftTree) {
  const Expr e = parse_expr("x1 - x1^3", {1, 0});
  const auto& r = e.root();
  ASSERT_EQ(r.op, Op::Sub);
  EXPECT_EQ(r.args[0]->op, Op::StateVar);
  EXPECT_EQ(r.args[0]->index, 0);
  const auto& pw = *r.args[1];
  ASSERT_EQ(pw.op, Op::Pow);
  EXPECT_EQ(pw.args[0]->op, Op::StateVar);
  EXPECT_EQ(pw.args[1]->op, Op::Const);
  EXPECT_EQ(pw.args[1]->value, 3.0);
}

TEST(Expr, ReferenceValues) {
  EXPECT_DOUBLE_EQ(parse_expr("x1/2 - x1^3", {1, 0}).eval(std::vector<double>{1.0}), -0.5);
  EXPECT_DOUBLE_EQ(parse_expr("0.25*x1^2 + 3*(x2^2-1)^2", {2, 0}).eval(std::vector<double>{0.0, 1.0}), 0.0);
  EXPECT_DOUBLE_EQ(parse_expr("1 - 0.5*exp(-x1^2)", {1, 0}).eval(std::vector<double>{0.0}), 0.5);
  EXPECT_DOUBLE_EQ(parse_expr("exp(-x1^2)", {1, 0}).eval(std::vector<double>{0.0}), 1.0);
  EXPECT_DOUBLE_EQ(parse_expr("x2 - 0.5*x1*x2", {2, 0}).eval(std::vector<double>{2.0, 3.0}), 0.0);
}

TEST(Expr, Precedence) {
  EXPECT_DOUBLE_EQ(ev("2^3^2"), 512.0);
  EXPECT_DOUBLE_EQ(ev("-2^2"), -4.0);
  EXPECT_DOUBLE_EQ(ev("2^-1"), 0.5);
  EXPECT_DOUBLE_EQ(ev("1 - 2 - 3"), -4.0);
  EXPECT_DOUBLE_EQ(ev("8 / 4 / 2"), 1.0);
  EXPECT_DOUBLE_EQ(ev("1 + 2 * 3"), 7.0);
  EXPECT_DOUBLE_EQ(ev("(1 + 2) * 3"), 9.0);
  EXPECT_DOUBLE_EQ(ev("--3"), 3.0);
  EXPECT_DOUBLE_EQ(ev("1.5e1 + .5"), 15.5);
}

TEST(Expr, Functions) {
  const std::vector<double> x{0.3, -1.7};
  EXPECT_DOUBLE_EQ(ev("sin(x1) + cos(x2)", x), std::sin(0.3) + std::cos(-1.7));
  EXPECT_DOUBLE_EQ(ev("sqrt(abs(x2))", x), std::sqrt(1.7));
  EXPECT_DOUBLE_EQ(ev("log(exp(x1))", x), 0.3);
  EXPECT_DOUBLE_EQ(ev("x2^2", x), 1.7 * 1.7);
  EXPECT_DOUBLE_EQ(ev("x2^3", x), std::pow(-1.7, 3));
}

TEST(Expr, Inputs) {
  const Expr e = parse_expr("x1*u1 + u2^2", {1, 2});
  EXPECT_TRUE(e.depends_on_input());
  EXPECT_EQ(e.max_input_index(), 1);
  EXPECT_DOUBLE_EQ(e.eval(std::vector<double>{2.0}, std::vector<double>{3.0, -1.0}), 7.0);
  EXPECT_FALSE(parse_expr("x1", {1, 2}).depends_on_input());
}

TEST(Expr, SyntaxErrorsCarryOffsets) {
  try {
    parse_expr("x1 + * 2", {1, 0});
    FAIL();
  } catch (const otdp::SyntaxError& e) {
    EXPECT_EQ(e.offset(), 5u);
    EXPECT_FALSE(e.expected().empty());
  }
  EXPECT_THROW(parse_expr("(x1", {1, 0}), otdp::SyntaxError);
  EXPECT_THROW(parse_expr("", {1, 0}), otdp::SyntaxError);
  EXPECT_THROW(parse_expr("x1 x1", {1, 0}), otdp::SyntaxError);
  EXPECT_THROW(parse_expr("exp x1", {1, 0}), otdp::SyntaxError);
}

TEST(Expr, UnknownIdentifiers) {
  try {
    parse_expr("x1 + x3", {2, 0});
    FAIL();
  } catch (const otdp::UnknownIdentifier& e) {
    EXPECT_EQ(e.name(), "x3");
    EXPECT_EQ(e.offset(), 5u);
  }
  EXPECT_THROW(parse_expr("u1", {1, 0}), otdp::UnknownIdentifier);
  EXPECT_THROW(parse_expr("x0", {1, 0}), otdp::UnknownIdentifier);
  EXPECT_THROW(parse_expr("tanh(x1)", {1, 0}), otdp::UnknownIdentifier);
}

TEST(Expr, DomainErrors) {
  EXPECT_THROW(ev("log(-1)"), otdp::DomainError);
  EXPECT_THROW(ev("sqrt(-2)"), otdp::DomainError);
  EXPECT_THROW(ev("(-2)^0.5"), otdp::DomainError);
  EXPECT_NO_THROW(ev("(-2)^3"));
}

TEST(Expr, PrintRoundTrip) {
  for (const char* s : {"x1 - x1^3", "x2 - 0.5*x1*x2", "-x1^2", "(-x1)^2", "2^3^2", "(2^3)^2", "1 - (2 - 3)",
                        "x1/(x2*3)", "0.25*x1^2 + 3*(x2^2 - 1)^2", "exp(-x1^2)*-2", "1e-7*x1 - -3"}) {
    const Expr a = parse_expr(s, {2, 1});
    const Expr b = parse_expr(a.str(), {2, 1});
    EXPECT_TRUE(a == b) << s << " printed as " << a.str();
    const std::vector<double> x{0.7, -1.3};
    EXPECT_DOUBLE_EQ(a.eval(x), b.eval(x)) << s;
  }
}

TEST(Expr, DeepExpressionsUseHeapStack) {
  std::string s = "x1";
  for (int i = 0; i < 200; ++i) s = "(1 + " + s + ")";
  EXPECT_DOUBLE_EQ(parse_expr(s, {1, 0}).eval(std::vector<double>{0.5}), 200.5);
}
