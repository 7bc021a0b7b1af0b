#pragma once

// A small expression language for defining task losses in config files.
// Grammar (standard precedence, '^' right-associative and binding tighter
// than unary minus, which binds tighter than '*'/'/'):
//
//   expr    := term  (('+' | '-') term)*
//   term    := factor (('*' | '/') factor)*
//   factor  := '-' factor | power
//   power   := primary ('^' factor)?
//   primary := number | variable | func '(' expr ')' | 'max'|'min' '(' expr ',' expr ')'
//            | '(' expr ')'
//
// Variables are x1..xm (1-based). Unary functions: log exp tanh abs sqrt.
// Evaluation is plain IEEE double arithmetic; max/min ties take the first
// argument and abs(0) = 0. Forward-mode differentiation carries one tangent
// per parameter with the conventions d|x|/dx = sign(x), sign(0) = 0, and
// max/min propagating the tangent of the selected argument.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cagrad/gradcore.hpp"

namespace cagrad {

struct ParseError : std::runtime_error {
  ParseError(std::size_t offset, const std::string& what)
      : std::runtime_error("parse error at byte " + std::to_string(offset) + ": " + what),
        offset(offset) {}
  std::size_t offset;
};

// Evaluation hit a mathematical domain violation; carries the offending node.
struct EvalDomainError : std::runtime_error {
  EvalDomainError(int node, std::size_t offset, std::string reason)
      : std::runtime_error("domain error at byte " + std::to_string(offset) + ": " + reason),
        node(node),
        offset(offset),
        reason(std::move(reason)) {}
  int node;
  std::size_t offset;
  std::string reason;
};

enum class NodeKind : std::uint8_t {
  constant, variable,
  neg, log, exp, tanh, abs, sqrt,
  add, sub, mul, div, pow,
  max, min,
};

struct ExprNode {
  NodeKind kind;
  double value = 0.0;     // constant payload
  int var = 0;            // 1-based variable index
  int a = -1, b = -1;     // child node indices
  std::uint32_t offset = 0;  // byte offset in the source text
};

// Nodes are stored in evaluation order: children always precede parents.
struct ExprAst {
  std::vector<ExprNode> nodes;
  int root = -1;
  int max_var = 0;  // highest variable index referenced
};

// Value plus one directional derivative per parameter.
struct DualValue {
  double value = 0.0;
  std::vector<double> tangents;
};

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprAst run() {
    if (text_.find_first_not_of(" \t\r\n") == std::string_view::npos) {
      throw ParseError(0, "empty expression");
    }
    ast_.root = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError(pos_, "unexpected trailing input");
    return std::move(ast_);
  }

 private:
  int add_node(ExprNode n) {
    ast_.nodes.push_back(n);
    return static_cast<int>(ast_.nodes.size()) - 1;
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\r' || text_[pos_] == '\n')) {
      ++pos_;
    }
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      skip_ws();
      const std::size_t at = pos_;
      if (eat('+')) {
        const int rhs = parse_term();
        lhs = add_node({NodeKind::add, 0, 0, lhs, rhs, static_cast<std::uint32_t>(at)});
      } else if (eat('-')) {
        const int rhs = parse_term();
        lhs = add_node({NodeKind::sub, 0, 0, lhs, rhs, static_cast<std::uint32_t>(at)});
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_factor();
    for (;;) {
      skip_ws();
      const std::size_t at = pos_;
      if (eat('*')) {
        const int rhs = parse_factor();
        lhs = add_node({NodeKind::mul, 0, 0, lhs, rhs, static_cast<std::uint32_t>(at)});
      } else if (eat('/')) {
        const int rhs = parse_factor();
        lhs = add_node({NodeKind::div, 0, 0, lhs, rhs, static_cast<std::uint32_t>(at)});
      } else {
        return lhs;
      }
    }
  }

  int parse_factor() {
    skip_ws();
    const std::size_t at = pos_;
    if (eat('-')) {
      const int child = parse_factor();
      return add_node({NodeKind::neg, 0, 0, child, -1, static_cast<std::uint32_t>(at)});
    }
    return parse_power();
  }

  int parse_power() {
    const int base = parse_primary();
    skip_ws();
    const std::size_t at = pos_;
    if (eat('^')) {
      const int exponent = parse_factor();  // right-associative, allows x^-2
      return add_node({NodeKind::pow, 0, 0, base, exponent, static_cast<std::uint32_t>(at)});
    }
    return base;
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = parse_expr();
      if (!eat(')')) throw ParseError(pos_, "expected ')'");
      return inner;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') return parse_identifier();
    throw ParseError(pos_, std::string("unexpected character '") + c + "'");
  }

  int parse_number() {
    const std::size_t at = pos_;
    double value = 0.0;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) throw ParseError(at, "malformed number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return add_node({NodeKind::constant, value, 0, -1, -1, static_cast<std::uint32_t>(at)});
  }

  int parse_identifier() {
    const std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_')) {
      ++end;
    }
    const std::string_view name = text_.substr(pos_, end - pos_);
    pos_ = end;

    if (name.size() >= 2 && name[0] == 'x') {
      int idx = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
      if (ec == std::errc() && ptr == name.data() + name.size()) {
        if (idx < 1) throw ParseError(at, "variable index must be >= 1");
        ast_.max_var = std::max(ast_.max_var, idx);
        return add_node({NodeKind::variable, 0, idx, -1, -1, static_cast<std::uint32_t>(at)});
      }
    }

    static constexpr std::array<std::pair<std::string_view, NodeKind>, 5> kUnary = {{
        {"log", NodeKind::log}, {"exp", NodeKind::exp}, {"tanh", NodeKind::tanh},
        {"abs", NodeKind::abs}, {"sqrt", NodeKind::sqrt},
    }};
    for (const auto& [fn, kind] : kUnary) {
      if (name == fn) {
        if (!eat('(')) throw ParseError(pos_, "expected '(' after function name");
        const int arg = parse_expr();
        skip_ws();
        if (eat(',')) throw ParseError(pos_ - 1, std::string(fn) + " takes exactly one argument");
        if (!eat(')')) throw ParseError(pos_, "expected ')'");
        return add_node({kind, 0, 0, arg, -1, static_cast<std::uint32_t>(at)});
      }
    }
    if (name == "max" || name == "min") {
      const NodeKind kind = name == "max" ? NodeKind::max : NodeKind::min;
      if (!eat('(')) throw ParseError(pos_, "expected '(' after function name");
      const int a = parse_expr();
      skip_ws();
      if (!eat(',')) throw ParseError(pos_, std::string(name) + " takes exactly two arguments");
      const int b = parse_expr();
      if (!eat(')')) throw ParseError(pos_, "expected ')'");
      return add_node({kind, 0, 0, a, b, static_cast<std::uint32_t>(at)});
    }
    throw ParseError(at, "unknown identifier '" + std::string(name) + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  ExprAst ast_;
};

}  // namespace detail

inline ExprAst parse(std::string_view text) { return detail::Parser(text).run(); }

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Precedence levels used by the printer: add/sub 1, mul/div 2, neg 3, pow 4,
// atoms and calls 5.
inline int precedence(NodeKind k) {
  switch (k) {
    case NodeKind::add:
    case NodeKind::sub: return 1;
    case NodeKind::mul:
    case NodeKind::div: return 2;
    case NodeKind::neg: return 3;
    case NodeKind::pow: return 4;
    default: return 5;
  }
}

inline void print_node(const ExprAst& ast, int idx, std::string& out) {
  const ExprNode& n = ast.nodes[static_cast<std::size_t>(idx)];
  auto child = [&](int ci, int min_prec) {
    const bool parens = precedence(ast.nodes[static_cast<std::size_t>(ci)].kind) < min_prec;
    if (parens) out += '(';
    print_node(ast, ci, out);
    if (parens) out += ')';
  };
  switch (n.kind) {
    case NodeKind::constant: out += format_double(n.value); return;
    case NodeKind::variable: out += 'x' + std::to_string(n.var); return;
    case NodeKind::neg: out += '-'; child(n.a, 3); return;
    case NodeKind::log: case NodeKind::exp: case NodeKind::tanh:
    case NodeKind::abs: case NodeKind::sqrt: {
      static constexpr const char* names[] = {"log", "exp", "tanh", "abs", "sqrt"};
      out += names[static_cast<int>(n.kind) - static_cast<int>(NodeKind::log)];
      out += '(';
      print_node(ast, n.a, out);
      out += ')';
      return;
    }
    case NodeKind::add: child(n.a, 1); out += " + "; child(n.b, 2); return;
    case NodeKind::sub: child(n.a, 1); out += " - "; child(n.b, 2); return;
    case NodeKind::mul: child(n.a, 2); out += '*'; child(n.b, 3); return;
    case NodeKind::div: child(n.a, 2); out += '/'; child(n.b, 3); return;
    case NodeKind::pow: child(n.a, 5); out += '^'; child(n.b, 3); return;
    case NodeKind::max: case NodeKind::min:
      out += n.kind == NodeKind::max ? "max(" : "min(";
      print_node(ast, n.a, out);
      out += ", ";
      print_node(ast, n.b, out);
      out += ')';
      return;
  }
}

}  // namespace detail

// Renders the tree so that parse(print(ast)) is structurally identical.
inline std::string print(const ExprAst& ast) {
  std::string out;
  detail::print_node(ast, ast.root, out);
  return out;
}

inline bool structurally_equal(const ExprAst& lhs, const ExprAst& rhs) {
  if (lhs.root < 0 || rhs.root < 0) return lhs.root == rhs.root;
  struct Cmp {
    const ExprAst& a;
    const ExprAst& b;
    bool eq(int i, int j) const {
      const ExprNode& x = a.nodes[static_cast<std::size_t>(i)];
      const ExprNode& y = b.nodes[static_cast<std::size_t>(j)];
      if (x.kind != y.kind) return false;
      switch (x.kind) {
        case NodeKind::constant: return x.value == y.value;
        case NodeKind::variable: return x.var == y.var;
        case NodeKind::neg: case NodeKind::log: case NodeKind::exp:
        case NodeKind::tanh: case NodeKind::abs: case NodeKind::sqrt:
          return eq(x.a, y.a);
        default:
          return eq(x.a, y.a) && eq(x.b, y.b);
      }
    }
  };
  return Cmp{lhs, rhs}.eq(lhs.root, rhs.root);
}

namespace detail {

template <bool WithTangents>
inline DualValue evaluate(const ExprAst& ast, const ParamVector& theta) {
  if (ast.root < 0) throw InvalidInputError("eval: empty ast");
  if (ast.max_var > static_cast<int>(theta.dim())) {
    throw InvalidInputError("eval: expression references x" + std::to_string(ast.max_var) +
                            " but theta has dimension " + std::to_string(theta.dim()));
  }
  const std::size_t m = WithTangents ? theta.dim() : 0;
  const std::size_t n = ast.nodes.size();
  std::vector<double> val(n, 0.0);
  std::vector<double> tan;  // tangents, n stripes of m
  if (WithTangents) tan.assign(n * m, 0.0);

  auto fail = [&](std::size_t i, const char* what) -> void {
    throw EvalDomainError(static_cast<int>(i), ast.nodes[i].offset, what);
  };

  for (std::size_t i = 0; i < n; ++i) {
    const ExprNode& nd = ast.nodes[i];
    const std::size_t ia = static_cast<std::size_t>(nd.a);
    const std::size_t ib = static_cast<std::size_t>(nd.b);
    double* t = WithTangents ? tan.data() + i * m : nullptr;
    const double* ta = WithTangents && nd.a >= 0 ? tan.data() + ia * m : nullptr;
    const double* tb = WithTangents && nd.b >= 0 ? tan.data() + ib * m : nullptr;
    switch (nd.kind) {
      case NodeKind::constant:
        val[i] = nd.value;
        break;
      case NodeKind::variable:
        val[i] = theta[static_cast<std::size_t>(nd.var - 1)];
        if (WithTangents) t[nd.var - 1] = 1.0;
        break;
      case NodeKind::neg:
        val[i] = -val[ia];
        if (WithTangents) for (std::size_t j = 0; j < m; ++j) t[j] = -ta[j];
        break;
      case NodeKind::log:
        if (!(val[ia] > 0.0)) fail(i, "log of nonpositive value");
        val[i] = std::log(val[ia]);
        if (WithTangents) for (std::size_t j = 0; j < m; ++j) t[j] = ta[j] / val[ia];
        break;
      case NodeKind::exp:
        val[i] = std::exp(val[ia]);
        if (WithTangents) for (std::size_t j = 0; j < m; ++j) t[j] = val[i] * ta[j];
        break;
      case NodeKind::tanh: {
        val[i] = std::tanh(val[ia]);
        if (WithTangents) {
          const double sech2 = 1.0 - val[i] * val[i];
          for (std::size_t j = 0; j < m; ++j) t[j] = sech2 * ta[j];
        }
        break;
      }
      case NodeKind::abs: {
        val[i] = std::abs(val[ia]);
        if (WithTangents) {
          const double s = val[ia] > 0.0 ? 1.0 : (val[ia] < 0.0 ? -1.0 : 0.0);
          for (std::size_t j = 0; j < m; ++j) t[j] = s * ta[j];
        }
        break;
      }
      case NodeKind::sqrt: {
        if (val[ia] < 0.0) fail(i, "sqrt of negative value");
        val[i] = std::sqrt(val[ia]);
        if (WithTangents) {
          const double s = val[i] > 0.0 ? 0.5 / val[i] : 0.0;  // slope pinned to 0 at 0
          for (std::size_t j = 0; j < m; ++j) t[j] = s * ta[j];
        }
        break;
      }
      case NodeKind::add:
        val[i] = val[ia] + val[ib];
        if (WithTangents) for (std::size_t j = 0; j < m; ++j) t[j] = ta[j] + tb[j];
        break;
      case NodeKind::sub:
        val[i] = val[ia] - val[ib];
        if (WithTangents) for (std::size_t j = 0; j < m; ++j) t[j] = ta[j] - tb[j];
        break;
      case NodeKind::mul:
        val[i] = val[ia] * val[ib];
        if (WithTangents)
          for (std::size_t j = 0; j < m; ++j) t[j] = ta[j] * val[ib] + val[ia] * tb[j];
        break;
      case NodeKind::div:
        if (val[ib] == 0.0) fail(i, "division by zero");
        val[i] = val[ia] / val[ib];
        if (WithTangents) {
          const double inv = 1.0 / val[ib];
          for (std::size_t j = 0; j < m; ++j)
            t[j] = (ta[j] - val[i] * tb[j]) * inv;
        }
        break;
      case NodeKind::pow: {
        const double base = val[ia];
        const double expo = val[ib];
        val[i] = std::pow(base, expo);
        if (!std::isfinite(val[i])) fail(i, "pow outside its domain");
        if (WithTangents) {
          bool expo_const = true;
          for (std::size_t j = 0; j < m; ++j) expo_const = expo_const && tb[j] == 0.0;
          if (expo_const) {
            double slope = 0.0;
            bool base_moves = false;
            for (std::size_t j = 0; j < m; ++j) base_moves = base_moves || ta[j] != 0.0;
            if (base_moves) {
              slope = expo * std::pow(base, expo - 1.0);
              if (!std::isfinite(slope)) fail(i, "pow derivative outside its domain");
            }
            for (std::size_t j = 0; j < m; ++j) t[j] = slope * ta[j];
          } else {
            if (!(base > 0.0)) fail(i, "pow with varying exponent needs positive base");
            const double lnb = std::log(base);
            for (std::size_t j = 0; j < m; ++j)
              t[j] = val[i] * (tb[j] * lnb + expo * ta[j] / base);
          }
        }
        break;
      }
      case NodeKind::max: case NodeKind::min: {
        const bool take_first = nd.kind == NodeKind::max ? val[ia] >= val[ib]
                                                         : val[ia] <= val[ib];
        const std::size_t pick = take_first ? ia : ib;
        val[i] = val[pick];
        if (WithTangents) {
          const double* tp = tan.data() + pick * m;
          for (std::size_t j = 0; j < m; ++j) t[j] = tp[j];
        }
        break;
      }
    }
  }

  DualValue out;
  out.value = val[static_cast<std::size_t>(ast.root)];
  if (WithTangents) {
    const double* tr = tan.data() + static_cast<std::size_t>(ast.root) * m;
    out.tangents.assign(tr, tr + m);
  }
  return out;
}

}  // namespace detail

inline double eval(const ExprAst& ast, const ParamVector& theta) {
  return detail::evaluate<false>(ast, theta).value;
}

// Value together with the full gradient via forward mode (m tangent lanes).
inline DualValue eval_dual(const ExprAst& ast, const ParamVector& theta) {
  return detail::evaluate<true>(ast, theta);
}

inline std::vector<double> grad(const ExprAst& ast, const ParamVector& theta) {
  return detail::evaluate<true>(ast, theta).tangents;
}

// Distance to the nearest derivative kink at theta: the smallest |a - b| over
// max/min nodes and |a| over abs nodes (+inf when the tree has none). Points
// with a comfortable margin are safe for finite-difference checks.
inline double nonsmooth_margin(const ExprAst& ast, const ParamVector& theta) {
  if (ast.max_var > static_cast<int>(theta.dim())) {
    throw InvalidInputError("nonsmooth_margin: theta dimension too small");
  }
  const std::size_t n = ast.nodes.size();
  std::vector<double> val(n, 0.0);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const ExprNode& nd = ast.nodes[i];
    const std::size_t ia = static_cast<std::size_t>(nd.a);
    const std::size_t ib = static_cast<std::size_t>(nd.b);
    switch (nd.kind) {
      case NodeKind::constant: val[i] = nd.value; break;
      case NodeKind::variable: val[i] = theta[static_cast<std::size_t>(nd.var - 1)]; break;
      case NodeKind::neg: val[i] = -val[ia]; break;
      case NodeKind::log: val[i] = std::log(val[ia]); break;
      case NodeKind::exp: val[i] = std::exp(val[ia]); break;
      case NodeKind::tanh: val[i] = std::tanh(val[ia]); break;
      case NodeKind::abs:
        margin = std::min(margin, std::abs(val[ia]));
        val[i] = std::abs(val[ia]);
        break;
      case NodeKind::sqrt: val[i] = std::sqrt(val[ia]); break;
      case NodeKind::add: val[i] = val[ia] + val[ib]; break;
      case NodeKind::sub: val[i] = val[ia] - val[ib]; break;
      case NodeKind::mul: val[i] = val[ia] * val[ib]; break;
      case NodeKind::div: val[i] = val[ia] / val[ib]; break;
      case NodeKind::pow: val[i] = std::pow(val[ia], val[ib]); break;
      case NodeKind::max:
        margin = std::min(margin, std::abs(val[ia] - val[ib]));
        val[i] = std::max(val[ia], val[ib]);
        break;
      case NodeKind::min:
        margin = std::min(margin, std::abs(val[ia] - val[ib]));
        val[i] = std::min(val[ia], val[ib]);
        break;
    }
  }
  return margin;
}

}  // namespace cagrad
