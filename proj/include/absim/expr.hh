/*
 * expr.hh
 *
 * scalar math expressions over state variables x1..xn, input variables
 * u1..um and an optional second state copy y1..yn; recursive descent
 * parser, canonical printer and a flat-tape evaluator
 *
 * grammar (precedence ^ > unary - > * / > + -, ^ right associative):
 *
 *   expr   := term (('+'|'-') term)*
 *   term   := factor (('*'|'/') factor)*
 *   factor := '-' factor | power
 *   power  := atom ('^' factor)?
 *   atom   := number | variable | func '(' expr ')' | '(' expr ')'
 *
 * expressions are immutable after parsing; evaluation is pure and safe
 * to call from many threads at once
 */

#ifndef ABSIM_EXPR_HH_
#define ABSIM_EXPR_HH_

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "absim/error.hh"

namespace absim {

enum class ExprOp : std::uint8_t {
  constant,
  var_x,
  var_u,
  var_y,
  add,
  sub,
  mul,
  div,
  pow,
  neg,
  fn_sin,
  fn_cos,
  fn_exp,
  fn_sqrt,
  fn_abs
};

struct ExprNode {
  ExprOp op;
  double value = 0.0; /* constant payload */
  int index = 0;      /* 0-based variable index */
  int lhs = -1;
  int rhs = -1;
  std::uint32_t offset = 0; /* byte offset in the source text */
};

namespace detail {

struct TapeOp {
  ExprOp op;
  std::int32_t arg;  /* constant pool slot or variable index */
  std::int32_t node; /* AST node behind this op, for error reports */
};

inline bool is_binary(ExprOp op) {
  return op == ExprOp::add || op == ExprOp::sub || op == ExprOp::mul ||
         op == ExprOp::div || op == ExprOp::pow;
}

inline bool is_unary(ExprOp op) {
  return op == ExprOp::neg || op == ExprOp::fn_sin || op == ExprOp::fn_cos ||
         op == ExprOp::fn_exp || op == ExprOp::fn_sqrt || op == ExprOp::fn_abs;
}

inline double format_double(char* buf, std::size_t n, double v) {
  std::snprintf(buf, n, "%.17g", v);
  return v;
}

}  // namespace detail

class Expression {
 public:
  Expression() = default;

  /* parse; throws Error(errc::syntax) with the byte offset of the fault */
  static Expression parse(const std::string& text);

  /* largest 1-based index referenced per variable family, 0 if unused */
  int max_x() const noexcept { return max_x_; }
  int max_u() const noexcept { return max_u_; }
  int max_y() const noexcept { return max_y_; }
  bool uses_y() const noexcept { return max_y_ > 0; }

  /* check variable indices against declared dimensions */
  void bind(int n, int m, bool allow_y = false) const {
    if (max_x_ > n)
      throw Error(errc::argument, "expression references x" + std::to_string(max_x_) +
                                      " but state dimension is " + std::to_string(n));
    if (max_u_ > m)
      throw Error(errc::argument, "expression references u" + std::to_string(max_u_) +
                                      " but input dimension is " + std::to_string(m));
    if (max_y_ > 0 && !allow_y)
      throw Error(errc::argument, "expression references y variables in a context without them");
    if (max_y_ > n)
      throw Error(errc::argument, "expression references y" + std::to_string(max_y_) +
                                      " but state dimension is " + std::to_string(n));
  }

  /* unchecked hot-path evaluation; pointers must cover the bound indices,
   * y may be null when the expression never references y variables */
  double eval(const double* x, const double* u, const double* y = nullptr) const {
    double sbuf[kStackReserve];
    std::vector<double> hbuf;
    double* st = sbuf;
    if (stack_need_ > kStackReserve) {
      hbuf.resize(static_cast<std::size_t>(stack_need_));
      st = hbuf.data();
    }
    int sp = 0;
    for (const auto& t : tape_) {
      switch (t.op) {
        case ExprOp::constant: st[sp++] = pool_[static_cast<std::size_t>(t.arg)]; break;
        case ExprOp::var_x: st[sp++] = x[t.arg]; break;
        case ExprOp::var_u: st[sp++] = u[t.arg]; break;
        case ExprOp::var_y: st[sp++] = y[t.arg]; break;
        case ExprOp::add: --sp; st[sp - 1] += st[sp]; break;
        case ExprOp::sub: --sp; st[sp - 1] -= st[sp]; break;
        case ExprOp::mul: --sp; st[sp - 1] *= st[sp]; break;
        case ExprOp::div:
          --sp;
          st[sp - 1] /= st[sp];
          if (!std::isfinite(st[sp - 1])) fail(t.node);
          break;
        case ExprOp::pow:
          --sp;
          st[sp - 1] = std::pow(st[sp - 1], st[sp]);
          if (!std::isfinite(st[sp - 1])) fail(t.node);
          break;
        case ExprOp::neg: st[sp - 1] = -st[sp - 1]; break;
        case ExprOp::fn_sin: st[sp - 1] = std::sin(st[sp - 1]); break;
        case ExprOp::fn_cos: st[sp - 1] = std::cos(st[sp - 1]); break;
        case ExprOp::fn_exp:
          st[sp - 1] = std::exp(st[sp - 1]);
          if (!std::isfinite(st[sp - 1])) fail(t.node);
          break;
        case ExprOp::fn_sqrt:
          st[sp - 1] = std::sqrt(st[sp - 1]);
          if (!std::isfinite(st[sp - 1])) fail(t.node);
          break;
        case ExprOp::fn_abs: st[sp - 1] = std::fabs(st[sp - 1]); break;
      }
    }
    if (!std::isfinite(st[0])) fail(static_cast<std::int32_t>(root_));
    return st[0];
  }

  /* checked evaluation */
  double evaluate(std::span<const double> x, std::span<const double> u,
                  std::span<const double> y = {}) const {
    if (static_cast<int>(x.size()) < max_x_)
      throw Error(errc::argument, "state vector shorter than referenced indices");
    if (static_cast<int>(u.size()) < max_u_)
      throw Error(errc::argument, "input vector shorter than referenced indices");
    if (uses_y() && static_cast<int>(y.size()) < max_y_)
      throw Error(errc::argument, "expression references y variables but no y vector supplied");
    return eval(x.data(), u.data(), y.empty() ? nullptr : y.data());
  }

  /* canonical text form; parse(print(e)) reproduces the tree exactly */
  std::string print() const { return print_node(root_); }

  const std::string& source() const noexcept { return source_; }
  bool empty() const noexcept { return nodes_.empty(); }

 private:
  static constexpr int kStackReserve = 64;

  std::vector<ExprNode> nodes_;
  std::size_t root_ = 0;
  std::string source_;
  int max_x_ = 0, max_u_ = 0, max_y_ = 0;

  std::vector<detail::TapeOp> tape_;
  std::vector<double> pool_;
  int stack_need_ = 0;

  [[noreturn]] void fail(std::int32_t node) const {
    throw Error(errc::domain, "non-finite value in '" +
                                  print_node(static_cast<std::size_t>(node)) + "'");
  }

  /* printer precedence: atoms 5, ^ 4, unary - 3, * / 2, + - 1 */
  static int prec(ExprOp op) {
    switch (op) {
      case ExprOp::add:
      case ExprOp::sub: return 1;
      case ExprOp::mul:
      case ExprOp::div: return 2;
      case ExprOp::neg: return 3;
      case ExprOp::pow: return 4;
      default: return 5;
    }
  }

  std::string print_node(std::size_t id) const {
    const ExprNode& nd = nodes_[id];
    char buf[40];
    switch (nd.op) {
      case ExprOp::constant:
        detail::format_double(buf, sizeof buf, nd.value);
        return buf;
      case ExprOp::var_x: return "x" + std::to_string(nd.index + 1);
      case ExprOp::var_u: return "u" + std::to_string(nd.index + 1);
      case ExprOp::var_y: return "y" + std::to_string(nd.index + 1);
      case ExprOp::neg: {
        std::string s = print_node(static_cast<std::size_t>(nd.lhs));
        if (prec(nodes_[static_cast<std::size_t>(nd.lhs)].op) < 3) s = "(" + s + ")";
        return "-" + s;
      }
      case ExprOp::fn_sin: return "sin(" + print_node(static_cast<std::size_t>(nd.lhs)) + ")";
      case ExprOp::fn_cos: return "cos(" + print_node(static_cast<std::size_t>(nd.lhs)) + ")";
      case ExprOp::fn_exp: return "exp(" + print_node(static_cast<std::size_t>(nd.lhs)) + ")";
      case ExprOp::fn_sqrt: return "sqrt(" + print_node(static_cast<std::size_t>(nd.lhs)) + ")";
      case ExprOp::fn_abs: return "abs(" + print_node(static_cast<std::size_t>(nd.lhs)) + ")";
      default: break;
    }
    const int p = prec(nd.op);
    const ExprNode& l = nodes_[static_cast<std::size_t>(nd.lhs)];
    const ExprNode& r = nodes_[static_cast<std::size_t>(nd.rhs)];
    std::string ls = print_node(static_cast<std::size_t>(nd.lhs));
    std::string rs = print_node(static_cast<std::size_t>(nd.rhs));
    const char* sym = nd.op == ExprOp::add   ? "+"
                      : nd.op == ExprOp::sub ? "-"
                      : nd.op == ExprOp::mul ? "*"
                      : nd.op == ExprOp::div ? "/"
                                             : "^";
    if (nd.op == ExprOp::pow) {
      /* left operand sits at atom level, exponent at factor level */
      if (prec(l.op) < 5) ls = "(" + ls + ")";
      if (prec(r.op) < 3) rs = "(" + rs + ")";
    } else {
      if (prec(l.op) < p) ls = "(" + ls + ")";
      /* keep explicit parentheses so the reparsed tree groups identically */
      if (prec(r.op) <= p || r.op == ExprOp::neg) rs = "(" + rs + ")";
    }
    return ls + sym + rs;
  }

  void compile();
  void fold_and_emit(std::size_t id);

  friend class ExprParser;
};

/* recursive descent over the byte string; offsets are 0-based */
class ExprParser {
 public:
  explicit ExprParser(const std::string& text) : text_(text) {}

  Expression run() {
    Expression e;
    e.source_ = text_;
    out_ = &e;
    pos_ = 0;
    e.root_ = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail(pos_, "unexpected trailing input");
    for (const auto& nd : e.nodes_) {
      if (nd.op == ExprOp::var_x) e.max_x_ = std::max(e.max_x_, nd.index + 1);
      if (nd.op == ExprOp::var_u) e.max_u_ = std::max(e.max_u_, nd.index + 1);
      if (nd.op == ExprOp::var_y) e.max_y_ = std::max(e.max_y_, nd.index + 1);
    }
    e.compile();
    return e;
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  Expression* out_ = nullptr;

  [[noreturn]] void fail(std::size_t at, const std::string& what) {
    throw Error(errc::syntax,
                "syntax error at offset " + std::to_string(at) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::size_t add(ExprNode nd) {
    out_->nodes_.push_back(nd);
    return out_->nodes_.size() - 1;
  }

  std::size_t parse_expr() {
    std::size_t lhs = parse_term();
    for (;;) {
      skip_ws();
      const std::uint32_t at = static_cast<std::uint32_t>(pos_);
      if (eat('+'))
        lhs = add({ExprOp::add, 0, 0, static_cast<int>(lhs), static_cast<int>(parse_term()), at});
      else if (eat('-'))
        lhs = add({ExprOp::sub, 0, 0, static_cast<int>(lhs), static_cast<int>(parse_term()), at});
      else
        return lhs;
    }
  }

  std::size_t parse_term() {
    std::size_t lhs = parse_factor();
    for (;;) {
      skip_ws();
      const std::uint32_t at = static_cast<std::uint32_t>(pos_);
      if (eat('*'))
        lhs = add({ExprOp::mul, 0, 0, static_cast<int>(lhs), static_cast<int>(parse_factor()), at});
      else if (eat('/'))
        lhs = add({ExprOp::div, 0, 0, static_cast<int>(lhs), static_cast<int>(parse_factor()), at});
      else
        return lhs;
    }
  }

  std::size_t parse_factor() {
    skip_ws();
    const std::uint32_t at = static_cast<std::uint32_t>(pos_);
    if (eat('-'))
      return add({ExprOp::neg, 0, 0, static_cast<int>(parse_factor()), -1, at});
    return parse_power();
  }

  std::size_t parse_power() {
    std::size_t base = parse_atom();
    skip_ws();
    const std::uint32_t at = static_cast<std::uint32_t>(pos_);
    if (eat('^'))
      return add({ExprOp::pow, 0, 0, static_cast<int>(base), static_cast<int>(parse_factor()), at});
    return base;
  }

  std::size_t parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail(pos_, "expected operand");
    const std::uint32_t at = static_cast<std::uint32_t>(pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      std::size_t inner = parse_expr();
      if (!eat(')')) fail(pos_, "expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_name();
    fail(pos_, std::string("unexpected character '") + c + "'");
  }

  std::size_t parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t mark = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      } else {
        pos_ = mark; /* not an exponent after all */
      }
    }
    const std::string tok = text_.substr(start, pos_ - start);
    if (tok == ".") fail(start, "malformed number");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) fail(start, "malformed number '" + tok + "'");
    return add({ExprOp::constant, v, 0, -1, -1, static_cast<std::uint32_t>(start)});
  }

  std::size_t parse_name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string name = text_.substr(start, pos_ - start);
    std::size_t dstart = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string digits = text_.substr(dstart, pos_ - dstart);

    if (digits.empty()) {
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        ExprOp fn;
        if (name == "sin") fn = ExprOp::fn_sin;
        else if (name == "cos") fn = ExprOp::fn_cos;
        else if (name == "exp") fn = ExprOp::fn_exp;
        else if (name == "sqrt") fn = ExprOp::fn_sqrt;
        else if (name == "abs") fn = ExprOp::fn_abs;
        else fail(start, "unknown function '" + name + "'");
        ++pos_;
        std::size_t argn = parse_expr();
        if (!eat(')')) fail(pos_, "expected ')'");
        return add({fn, 0, 0, static_cast<int>(argn), -1, static_cast<std::uint32_t>(start)});
      }
      fail(start, "unknown variable '" + name + "'");
    }

    ExprOp var;
    if (name == "x") var = ExprOp::var_x;
    else if (name == "u") var = ExprOp::var_u;
    else if (name == "y") var = ExprOp::var_y;
    else fail(start, "unknown variable '" + name + digits + "'");
    const long idx = std::strtol(digits.c_str(), nullptr, 10);
    if (idx < 1) fail(start, "unknown variable '" + name + digits + "' (indices start at 1)");
    return add({var, 0, static_cast<int>(idx - 1), -1, -1, static_cast<std::uint32_t>(start)});
  }
};

inline Expression Expression::parse(const std::string& text) { return ExprParser(text).run(); }

/* tape compilation with folding of finite constant subtrees */
inline void Expression::compile() {
  tape_.clear();
  pool_.clear();
  fold_and_emit(root_);
  int sp = 0;
  stack_need_ = 0;
  for (const auto& t : tape_) {
    if (t.op == ExprOp::constant || t.op == ExprOp::var_x || t.op == ExprOp::var_u ||
        t.op == ExprOp::var_y)
      ++sp;
    else if (detail::is_binary(t.op))
      --sp;
    stack_need_ = std::max(stack_need_, sp);
  }
}

inline void Expression::fold_and_emit(std::size_t id) {
  const ExprNode& nd = nodes_[id];
  if (nd.op == ExprOp::constant) {
    tape_.push_back({ExprOp::constant, static_cast<std::int32_t>(pool_.size()),
                     static_cast<std::int32_t>(id)});
    pool_.push_back(nd.value);
    return;
  }
  if (nd.op == ExprOp::var_x || nd.op == ExprOp::var_u || nd.op == ExprOp::var_y) {
    tape_.push_back({nd.op, nd.index, static_cast<std::int32_t>(id)});
    return;
  }
  const std::size_t tmark = tape_.size();
  const std::size_t pmark = pool_.size();
  fold_and_emit(static_cast<std::size_t>(nd.lhs));
  const bool lconst = tape_.size() == tmark + 1 && tape_.back().op == ExprOp::constant;
  const std::size_t rtmark = tape_.size();
  bool rconst = true;
  if (detail::is_binary(nd.op)) {
    fold_and_emit(static_cast<std::size_t>(nd.rhs));
    rconst = tape_.size() == rtmark + 1 && tape_.back().op == ExprOp::constant;
  }
  if (lconst && rconst) {
    const double a = pool_[static_cast<std::size_t>(tape_[tmark].arg)];
    const double b = detail::is_binary(nd.op)
                         ? pool_[static_cast<std::size_t>(tape_[rtmark].arg)]
                         : 0.0;
    double v = 0.0;
    switch (nd.op) {
      case ExprOp::add: v = a + b; break;
      case ExprOp::sub: v = a - b; break;
      case ExprOp::mul: v = a * b; break;
      case ExprOp::div: v = a / b; break;
      case ExprOp::pow: v = std::pow(a, b); break;
      case ExprOp::neg: v = -a; break;
      case ExprOp::fn_sin: v = std::sin(a); break;
      case ExprOp::fn_cos: v = std::cos(a); break;
      case ExprOp::fn_exp: v = std::exp(a); break;
      case ExprOp::fn_sqrt: v = std::sqrt(a); break;
      case ExprOp::fn_abs: v = std::fabs(a); break;
      default: break;
    }
    if (std::isfinite(v)) {
      tape_.resize(tmark);
      pool_.resize(pmark);
      tape_.push_back({ExprOp::constant, static_cast<std::int32_t>(pool_.size()),
                       static_cast<std::int32_t>(id)});
      pool_.push_back(v);
      return;
    }
  }
  tape_.push_back({nd.op, 0, static_cast<std::int32_t>(id)});
}

}  // namespace absim

#endif /* ABSIM_EXPR_HH_ */
