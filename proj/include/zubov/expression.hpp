#pragma once

// Arithmetic expressions over state variables x1..xN and control variables
// a1..aM, parsed from text.
//
// Grammar (lowest to highest precedence):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | variable | func '(' expr (',' expr)* ')' | '(' expr ')'
//
// Numbers are decimal literals with an optional exponent. Functions: sin, cos,
// exp, ln, abs, sqrt (one argument) and min, max (two arguments).

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zubov::expr {

enum class Op : std::uint8_t {
  constant,
  state_var,
  control_var,
  negate,
  add,
  sub,
  mul,
  div,
  pow,
  sin,
  cos,
  exp,
  ln,
  abs,
  sqrt,
  min,
  max,
};

/// One tree node. Nodes are stored in post-order so children always precede
/// their parent; `lhs`/`rhs` index into the same node array (-1 when unused).
struct Node {
  Op op = Op::constant;
  double value = 0.0;  // constant value
  int index = 0;       // 0-based variable index
  int lhs = -1;
  int rhs = -1;

  friend bool operator==(const Node&, const Node&) = default;
};

class Expression {
 public:
  /// Parses `source`. Variables are checked against the declared state and
  /// control dimensions. Throws ParseError on any syntax, identifier or arity
  /// problem.
  static Expression parse(std::string_view source, int state_dim, int control_dim);

  /// Constant expression, mostly useful as a default.
  static Expression constant(double value, int state_dim = 0, int control_dim = 0);

  /// Evaluates the expression. Throws DomainError rather than returning NaN or
  /// infinity. Reentrant.
  double evaluate(std::span<const double> state, std::span<const double> control) const;

  /// Identifiers that occur in the tree, e.g. {"a1", "x1"}.
  std::set<std::string> free_variables() const;

  /// Re-parseable text with minimal parentheses and 17 significant digits.
  std::string to_string() const;

  /// Function-call form, e.g. add(neg(x1), mul(a1, pow(x1, 2))).
  std::string to_sexpr() const;

  const std::string& source() const noexcept { return source_; }
  int state_dim() const noexcept { return state_dim_; }
  int control_dim() const noexcept { return control_dim_; }
  std::span<const Node> nodes() const noexcept { return nodes_; }

  /// Structural equality; the source text is ignored.
  bool structurally_equal(const Expression& other) const { return nodes_ == other.nodes_; }

 private:
  friend class Parser;
  Expression() = default;

  std::vector<Node> nodes_;
  std::string source_;
  int state_dim_ = 0;
  int control_dim_ = 0;
};

/// Name of a function op ("sin", "min", ...); empty for non-function ops.
std::string_view function_name(Op op);

}  // namespace zubov::expr
