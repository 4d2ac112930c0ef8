#include "otdp/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <string>

#include "otdp/error.hpp"

namespace otdp {

namespace {

using Op = Expr::Op;
using NodePtr = Expr::NodePtr;

NodePtr make_node(Op op, double value = 0.0, int index = -1, std::vector<NodePtr> args = {}) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->value = value;
  n->index = index;
  n->args = std::move(args);
  return n;
}

struct FunctionName {
  std::string_view name;
  Op op;
};

constexpr std::array<FunctionName, 6> kFunctions{{
    {"exp", Op::Exp}, {"log", Op::Log}, {"sin", Op::Sin},
    {"cos", Op::Cos}, {"sqrt", Op::Sqrt}, {"abs", Op::Abs},
}};

const char* function_name(Op op) {
  for (const auto& f : kFunctions)
    if (f.op == op) return f.name.data();
  return "?";
}

class Parser {
 public:
  Parser(std::string_view src, VariableSet vars) : src_(src), vars_(vars) {}

  NodePtr parse() {
    NodePtr e = expression();
    skip_space();
    if (pos_ != src_.size()) fail({"operator", "end of input"});
    return e;
  }

 private:
  [[noreturn]] void fail(std::vector<std::string> expected) const {
    std::string msg = "syntax error at byte " + std::to_string(pos_) + ": expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += expected[i];
    }
    if (pos_ < src_.size())
      msg += ", found '" + std::string(1, src_[pos_]) + "'";
    else
      msg += ", found end of input";
    throw SyntaxError(pos_, std::move(expected), msg);
  }

  void skip_space() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' ||
                                  src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expression() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make_node(Op::Add, 0, -1, {lhs, term()});
      else if (accept('-'))
        lhs = make_node(Op::Sub, 0, -1, {lhs, term()});
      else
        return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make_node(Op::Mul, 0, -1, {lhs, unary()});
      else if (accept('/'))
        lhs = make_node(Op::Div, 0, -1, {lhs, unary()});
      else
        return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_node(Op::Neg, 0, -1, {unary()});
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_node(Op::Pow, 0, -1, {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= src_.size()) fail({"number", "identifier", "'('", "'-'"});
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = expression();
      if (!accept(')')) fail({"')'"});
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail({"number", "identifier", "'('", "'-'"});
  }

  NodePtr number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ == start + 1 && src_[start] == '.') {
      pos_ = start;
      fail({"number"});
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        pos_ = save + 1;
        fail({"exponent digits"});
      }
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (ec != std::errc() || ptr != src_.data() + pos_) {
      pos_ = start;
      fail({"number"});
    }
    return make_node(Op::Const, v);
  }

  NodePtr identifier() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string_view name = src_.substr(start, pos_ - start);

    for (const auto& f : kFunctions) {
      if (f.name == name) {
        if (!accept('(')) fail({"'('"});
        NodePtr arg = expression();
        if (!accept(')')) fail({"')'"});
        return make_node(f.op, 0, -1, {arg});
      }
    }

    if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'u') && name[1] != '0') {
      int k = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
      if (ec == std::errc() && ptr == name.data() + name.size() && k >= 1) {
        if (name[0] == 'x' && k <= vars_.nx) return make_node(Op::StateVar, 0, k - 1);
        if (name[0] == 'u' && k <= vars_.nu) return make_node(Op::InputVar, 0, k - 1);
      }
    }
    throw UnknownIdentifier(std::string(name), start);
  }

  std::string_view src_;
  VariableSet vars_;
  std::size_t pos_ = 0;
};

int precedence(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

void print(const Expr::Node& n, std::string& out);

void print_wrapped(const Expr::Node& n, bool parens, std::string& out) {
  if (parens) out += '(';
  print(n, out);
  if (parens) out += ')';
}

void print(const Expr::Node& n, std::string& out) {
  switch (n.op) {
    case Op::Const: {
      char buf[64];
      auto res = std::to_chars(buf, buf + sizeof buf, std::abs(n.value));
      std::string s(buf, res.ptr);
      if (std::signbit(n.value))
        out += "(-" + s + ")";
      else
        out += s;
      return;
    }
    case Op::StateVar: out += "x" + std::to_string(n.index + 1); return;
    case Op::InputVar: out += "u" + std::to_string(n.index + 1); return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      int p = precedence(n.op);
      print_wrapped(*n.args[0], precedence(n.args[0]->op) < p, out);
      out += n.op == Op::Add ? " + " : n.op == Op::Sub ? " - " : n.op == Op::Mul ? "*" : "/";
      print_wrapped(*n.args[1], precedence(n.args[1]->op) <= p, out);
      return;
    }
    case Op::Pow:
      print_wrapped(*n.args[0], precedence(n.args[0]->op) <= 4, out);
      out += '^';
      print_wrapped(*n.args[1], precedence(n.args[1]->op) < 3, out);
      return;
    case Op::Neg:
      out += '-';
      print_wrapped(*n.args[0], precedence(n.args[0]->op) < 3, out);
      return;
    default:
      out += function_name(n.op);
      out += '(';
      print(*n.args[0], out);
      out += ')';
      return;
  }
}

bool same_tree(const Expr::Node& a, const Expr::Node& b) {
  if (a.op != b.op || a.index != b.index || a.args.size() != b.args.size()) return false;
  if (a.op == Op::Const && !(a.value == b.value && std::signbit(a.value) == std::signbit(b.value)))
    return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!same_tree(*a.args[i], *b.args[i])) return false;
  return true;
}

}  // namespace

Expr::Expr() : Expr(make_node(Op::Const, 0.0)) {}

Expr::Expr(NodePtr root) : root_(std::move(root)) { compile(); }

Expr Expr::constant(double value) { return Expr(make_node(Op::Const, value)); }
Expr Expr::state(int index) { return Expr(make_node(Op::StateVar, 0, index)); }
Expr Expr::input(int index) { return Expr(make_node(Op::InputVar, 0, index)); }

void Expr::compile() {
  program_.clear();
  int depth = 0;
  stack_depth_ = 0;
  auto emit = [&](auto&& self, const Node& n) -> void {
    for (const auto& a : n.args) self(self, *a);
    program_.push_back({n.op, n.index, n.value});
    if (n.args.empty())
      ++depth;
    else
      depth -= static_cast<int>(n.args.size()) - 1;
    stack_depth_ = std::max(stack_depth_, depth);
    if (n.op == Op::StateVar) max_state_ = std::max(max_state_, n.index);
    if (n.op == Op::InputVar) {
      max_input_ = std::max(max_input_, n.index);
      uses_input_ = true;
    }
  };
  emit(emit, *root_);
}

double Expr::eval(std::span<const double> x, std::span<const double> u) const {
  constexpr int kInline = 32;
  double small[kInline] = {};
  std::vector<double> big;
  double* st = small;
  if (stack_depth_ > kInline) {
    big.resize(static_cast<std::size_t>(stack_depth_));
    st = big.data();
  }
  int sp = 0;
  for (const Instr& in : program_) {
    switch (in.op) {
      case Op::Const: st[sp++] = in.value; break;
      case Op::StateVar: st[sp++] = x[static_cast<std::size_t>(in.index)]; break;
      case Op::InputVar: st[sp++] = u[static_cast<std::size_t>(in.index)]; break;
      case Op::Add: --sp; st[sp - 1] += st[sp]; break;
      case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
      case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
      case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
      case Op::Pow: {
        --sp;
        double b = st[sp - 1], e = st[sp];
        if (b < 0.0 && e != std::floor(e))
          throw DomainError("negative base raised to a non-integer power");
        if (e == 2.0)
          st[sp - 1] = b * b;
        else
          st[sp - 1] = std::pow(b, e);
        break;
      }
      case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
      case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
      case Op::Log:
        if (st[sp - 1] < 0.0) throw DomainError("log of a negative argument");
        st[sp - 1] = std::log(st[sp - 1]);
        break;
      case Op::Sin: st[sp - 1] = std::sin(st[sp - 1]); break;
      case Op::Cos: st[sp - 1] = std::cos(st[sp - 1]); break;
      case Op::Sqrt:
        if (st[sp - 1] < 0.0) throw DomainError("sqrt of a negative argument");
        st[sp - 1] = std::sqrt(st[sp - 1]);
        break;
      case Op::Abs: st[sp - 1] = std::abs(st[sp - 1]); break;
    }
  }
  return st[0];
}

std::string Expr::str() const {
  std::string out;
  print(*root_, out);
  return out;
}

bool operator==(const Expr& a, const Expr& b) { return same_tree(*a.root_, *b.root_); }

Expr parse_expr(std::string_view source, VariableSet vars) {
  return Expr(Parser(source, vars).parse());
}

}  // namespace otdp
