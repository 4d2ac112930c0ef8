#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace otdp {

/// Names that may appear in an expression: x1..x{nx}, u1..u{nu}.
struct VariableSet {
  int nx = 0;
  int nu = 0;
};

/// Immutable arithmetic expression over state and input variables.
///
/// Holds the syntax tree (for printing and structural comparison) and a
/// flattened postfix program used for evaluation. Copies share the tree.
/// eval() is reentrant.
class Expr {
 public:
  enum class Op : std::uint8_t {
    Const, StateVar, InputVar,
    Add, Sub, Mul, Div, Pow,
    Neg, Exp, Log, Sin, Cos, Sqrt, Abs,
  };

  struct Node;
  using NodePtr = std::shared_ptr<const Node>;

  struct Node {
    Op op = Op::Const;
    double value = 0.0;  // Const
    int index = -1;      // StateVar / InputVar, zero based
    std::vector<NodePtr> args;
  };

  /// The constant zero.
  Expr();
  explicit Expr(NodePtr root);

  static Expr constant(double value);
  static Expr state(int index);
  static Expr input(int index);

  const Node& root() const noexcept { return *root_; }

  /// Throws DomainError for log/sqrt of a negative argument and for a
  /// negative base raised to a non-integer power.
  double eval(std::span<const double> x, std::span<const double> u = {}) const;

  bool depends_on_input() const noexcept { return uses_input_; }
  bool is_constant() const noexcept { return root_->op == Op::Const; }
  int max_state_index() const noexcept { return max_state_; }
  int max_input_index() const noexcept { return max_input_; }

  /// Text that parses back to a structurally identical tree.
  std::string str() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Instr {
    Op op;
    int index;
    double value;
  };

  void compile();

  NodePtr root_;
  std::vector<Instr> program_;
  int stack_depth_ = 0;
  int max_state_ = -1;
  int max_input_ = -1;
  bool uses_input_ = false;
};

/// Parses `source` with the usual precedence (^ binds tighter than unary
/// minus, which binds tighter than * /, then + -). Binary + - * / are left
/// associative, ^ is right associative.
///
/// Throws SyntaxError (with byte offset and expected tokens) or
/// UnknownIdentifier.
Expr parse_expr(std::string_view source, VariableSet vars);

}  // namespace otdp
