#include "zubov/expression.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "zubov/error.hpp"

namespace zubov::expr {

namespace {

struct FunctionInfo {
  std::string_view name;
  Op op;
  int arity;
};

constexpr std::array<FunctionInfo, 8> kFunctions{{
    {"sin", Op::sin, 1},
    {"cos", Op::cos, 1},
    {"exp", Op::exp, 1},
    {"ln", Op::ln, 1},
    {"abs", Op::abs, 1},
    {"sqrt", Op::sqrt, 1},
    {"min", Op::min, 2},
    {"max", Op::max, 2},
}};

std::optional<FunctionInfo> find_function(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (f.name == name) return f;
  }
  return std::nullopt;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view function_name(Op op) {
  for (const auto& f : kFunctions) {
    if (f.op == op) return f.name;
  }
  return {};
}

class Parser {
 public:
  Parser(std::string_view src, int state_dim, int control_dim)
      : src_(src), state_dim_(state_dim), control_dim_(control_dim) {}

  Expression run() {
    skip_ws();
    if (pos_ >= src_.size()) fail("empty expression");
    parse_expr();
    skip_ws();
    if (pos_ < src_.size()) fail(std::string("unexpected '") + src_[pos_] + "'");
    Expression e;
    e.nodes_ = std::move(nodes_);
    e.source_ = std::string(src_);
    e.state_dim_ = state_dim_;
    e.control_dim_ = control_dim_;
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("syntax error: " + what, pos_ + 1); }
  [[noreturn]] void fail_at(const std::string& what, std::size_t pos) const { throw ParseError(what, pos + 1); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int push(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int binary(Op op, int lhs, int rhs) { return push(Node{op, 0.0, 0, lhs, rhs}); }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(Op::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = binary(Op::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary(Op::mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = binary(Op::div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    if (accept('-')) {
      int child = parse_unary();
      return push(Node{Op::negate, 0.0, 0, child, -1});
    }
    return parse_power();
  }

  int parse_power() {
    int base = parse_primary();
    if (accept('^')) {
      int exponent = parse_unary();
      return binary(Op::pow, base, exponent);
    }
    return base;
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      int inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected '") + c + "'");
  }

  int parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) fail_at("syntax error: malformed number", start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("malformed exponent");
    }
    double value = 0.0;
    const auto text = src_.substr(start, pos_ - start);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
      fail_at("syntax error: number out of range", start);
    }
    return push(Node{Op::constant, value, 0, -1, -1});
  }

  int parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(src_.substr(start, pos_ - start));

    if (auto fn = find_function(name)) {
      if (!accept('(')) fail("expected '(' after " + name);
      std::vector<int> args;
      args.push_back(parse_expr());
      while (accept(',')) args.push_back(parse_expr());
      if (!accept(')')) fail("expected ')'");
      if (static_cast<int>(args.size()) != fn->arity) {
        fail_at("arity mismatch: " + name + " expects " + std::to_string(fn->arity) + " argument(s), got " +
                    std::to_string(args.size()),
                start);
      }
      return push(Node{fn->op, 0.0, 0, args[0], fn->arity == 2 ? args[1] : -1});
    }

    if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'a')) {
      const auto digits = std::string_view(name).substr(1);
      int k = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
      const bool numeric = ec == std::errc() && ptr == digits.data() + digits.size() && digits[0] != '0';
      if (numeric) {
        const bool is_state = name[0] == 'x';
        const int limit = is_state ? state_dim_ : control_dim_;
        if (k >= 1 && k <= limit) {
          return push(Node{is_state ? Op::state_var : Op::control_var, 0.0, k - 1, -1, -1});
        }
      }
    }
    fail_at("unknown identifier '" + name + "'", start);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int state_dim_;
  int control_dim_;
  std::vector<Node> nodes_;
};

Expression Expression::parse(std::string_view source, int state_dim, int control_dim) {
  return Parser(source, state_dim, control_dim).run();
}

Expression Expression::constant(double value, int state_dim, int control_dim) {
  Expression e;
  e.nodes_.push_back(Node{Op::constant, value, 0, -1, -1});
  e.source_ = format_number(value);
  e.state_dim_ = state_dim;
  e.control_dim_ = control_dim;
  return e;
}

namespace {

[[noreturn]] void domain(const char* what) { throw DomainError(what); }

double apply(const Node& n, double a, double b) {
  switch (n.op) {
    case Op::negate:
      return -a;
    case Op::add:
      return a + b;
    case Op::sub:
      return a - b;
    case Op::mul:
      return a * b;
    case Op::div:
      if (b == 0.0) domain("division by zero");
      return a / b;
    case Op::pow:
      if (a < 0.0 && std::trunc(b) != b) domain("negative base with non-integer exponent");
      if (a == 0.0 && b < 0.0) domain("division by zero in power");
      return std::pow(a, b);
    case Op::sin:
      return std::sin(a);
    case Op::cos:
      return std::cos(a);
    case Op::exp:
      return std::exp(a);
    case Op::ln:
      if (!(a > 0.0)) domain("ln of nonpositive argument");
      return std::log(a);
    case Op::abs:
      return std::fabs(a);
    case Op::sqrt:
      if (a < 0.0) domain("sqrt of negative argument");
      return std::sqrt(a);
    case Op::min:
      return std::fmin(a, b);
    case Op::max:
      return std::fmax(a, b);
    default:
      return 0.0;
  }
}

}  // namespace

double Expression::evaluate(std::span<const double> state, std::span<const double> control) const {
  constexpr std::size_t kInline = 256;
  std::array<double, kInline> inline_buf;
  std::vector<double> heap_buf;
  double* vals = inline_buf.data();
  if (nodes_.size() > kInline) {
    heap_buf.resize(nodes_.size());
    vals = heap_buf.data();
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    double v = 0.0;
    switch (n.op) {
      case Op::constant:
        v = n.value;
        break;
      case Op::state_var:
        if (static_cast<std::size_t>(n.index) >= state.size()) throw Error("state vector too short");
        v = state[n.index];
        break;
      case Op::control_var:
        if (static_cast<std::size_t>(n.index) >= control.size()) throw Error("control vector too short");
        v = control[n.index];
        break;
      default:
        v = apply(n, vals[n.lhs], n.rhs >= 0 ? vals[n.rhs] : 0.0);
        if (!std::isfinite(v)) domain("non-finite result");
    }
    vals[i] = v;
  }
  return vals[nodes_.size() - 1];
}

std::set<std::string> Expression::free_variables() const {
  std::set<std::string> out;
  for (const auto& n : nodes_) {
    if (n.op == Op::state_var) out.insert("x" + std::to_string(n.index + 1));
    if (n.op == Op::control_var) out.insert("a" + std::to_string(n.index + 1));
  }
  return out;
}

namespace {

int precedence(Op op) {
  switch (op) {
    case Op::add:
    case Op::sub:
      return 1;
    case Op::mul:
    case Op::div:
      return 2;
    case Op::negate:
      return 3;
    case Op::pow:
      return 4;
    default:
      return 5;
  }
}

void print(const std::vector<Node>& nodes, int i, std::ostringstream& os);

void print_wrapped(const std::vector<Node>& nodes, int i, bool wrap, std::ostringstream& os) {
  if (wrap) os << '(';
  print(nodes, i, os);
  if (wrap) os << ')';
}

void print(const std::vector<Node>& nodes, int i, std::ostringstream& os) {
  const Node& n = nodes[i];
  switch (n.op) {
    case Op::constant:
      os << format_number(n.value);
      return;
    case Op::state_var:
      os << 'x' << n.index + 1;
      return;
    case Op::control_var:
      os << 'a' << n.index + 1;
      return;
    case Op::negate:
      os << '-';
      print_wrapped(nodes, n.lhs, precedence(nodes[n.lhs].op) < 3, os);
      return;
    case Op::pow:
      print_wrapped(nodes, n.lhs, precedence(nodes[n.lhs].op) < 5, os);
      os << '^';
      print_wrapped(nodes, n.rhs, precedence(nodes[n.rhs].op) < 3, os);
      return;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      const int p = precedence(n.op);
      print_wrapped(nodes, n.lhs, precedence(nodes[n.lhs].op) < p, os);
      switch (n.op) {
        case Op::add:
          os << " + ";
          break;
        case Op::sub:
          os << " - ";
          break;
        case Op::mul:
          os << '*';
          break;
        default:
          os << '/';
      }
      print_wrapped(nodes, n.rhs, precedence(nodes[n.rhs].op) <= p, os);
      return;
    }
    default:
      os << function_name(n.op) << '(';
      print(nodes, n.lhs, os);
      if (n.rhs >= 0) {
        os << ", ";
        print(nodes, n.rhs, os);
      }
      os << ')';
  }
}

void print_sexpr(const std::vector<Node>& nodes, int i, std::ostringstream& os) {
  const Node& n = nodes[i];
  const char* name = nullptr;
  switch (n.op) {
    case Op::constant:
      os << format_number(n.value);
      return;
    case Op::state_var:
      os << 'x' << n.index + 1;
      return;
    case Op::control_var:
      os << 'a' << n.index + 1;
      return;
    case Op::negate:
      name = "neg";
      break;
    case Op::add:
      name = "add";
      break;
    case Op::sub:
      name = "sub";
      break;
    case Op::mul:
      name = "mul";
      break;
    case Op::div:
      name = "div";
      break;
    case Op::pow:
      name = "pow";
      break;
    default:
      break;
  }
  if (name) {
    os << name;
  } else {
    os << function_name(n.op);
  }
  os << '(';
  print_sexpr(nodes, n.lhs, os);
  if (n.rhs >= 0) {
    os << ", ";
    print_sexpr(nodes, n.rhs, os);
  }
  os << ')';
}

}  // namespace

std::string Expression::to_string() const {
  std::ostringstream os;
  print(nodes_, static_cast<int>(nodes_.size()) - 1, os);
  return os.str();
}

std::string Expression::to_sexpr() const {
  std::ostringstream os;
  print_sexpr(nodes_, static_cast<int>(nodes_.size()) - 1, os);
  return os.str();
}

}  // namespace zubov::expr
