#ifndef SBOS_EXPRLANG_HPP
#define SBOS_EXPRLANG_HPP

#include <cctype>
#include <cstdio>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "supermatrix.hpp"

// Grammar:
//   expr     := term (('+' | '-') term)*
//   term     := unary (('*' | '/') unary)*
//   unary    := '-' unary | power
//   power    := primary ('^' exponent)?
//   exponent := INT | '-' INT | '(' '-'? INT ('/' INT)? ')'
//   primary  := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
//   VAR      := x | y | sigma | tau | Q
//   FUNC     := tr | str | det | sdet | exp

namespace sbos::expr {

struct Span {
  int begin = 0, end = 0;
};

enum class Op { Num, Var, Add, Sub, Mul, Div, Neg, Pow, Call };

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
  Op op;
  double num = 0;
  std::string name;
  long pnum = 1, pden = 1;
  std::vector<Expr> args;
  Span span;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int col)
      : std::runtime_error("syntax error at " + std::to_string(line) + ":" + std::to_string(col) + ": " + what),
        line_(line), col_(col) {}
  int line() const { return line_; }
  int column() const { return col_; }

 private:
  int line_, col_;
};

class TypeError : public std::runtime_error {
 public:
  TypeError(const std::string& what, Span s)
      : std::runtime_error("type error at [" + std::to_string(s.begin) + "," + std::to_string(s.end) + "): " + what),
        span_(s) {}
  Span span() const { return span_; }

 private:
  Span span_;
};

namespace detail {

inline bool is_var(const std::string& s) { return s == "x" || s == "y" || s == "sigma" || s == "tau" || s == "Q"; }
inline bool is_func(const std::string& s) {
  return s == "tr" || s == "str" || s == "det" || s == "sdet" || s == "exp";
}

class Parser {
 public:
  explicit Parser(const std::string& src) : s_(src) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ != static_cast<int>(s_.size())) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    int line = 1, col = 1;
    for (int k = 0; k < pos_ && k < static_cast<int>(s_.size()); ++k) {
      if (s_[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(msg, line, col);
  }

  void skip() {
    while (pos_ < static_cast<int>(s_.size()) && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip();
    return pos_ < static_cast<int>(s_.size()) && s_[pos_] == c;
  }
  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  static Expr make(Op op, std::vector<Expr> args, Span sp) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->args = std::move(args);
    n->span = sp;
    return n;
  }

  Expr expr() {
    skip();
    int b = pos_;
    Expr e = term();
    while (true) {
      if (accept('+'))
        e = make(Op::Add, {e, term()}, {b, pos_});
      else if (accept('-'))
        e = make(Op::Sub, {e, term()}, {b, pos_});
      else
        return e;
    }
  }

  Expr term() {
    skip();
    int b = pos_;
    Expr e = unary();
    while (true) {
      if (accept('*'))
        e = make(Op::Mul, {e, unary()}, {b, pos_});
      else if (accept('/'))
        e = make(Op::Div, {e, unary()}, {b, pos_});
      else
        return e;
    }
  }

  Expr unary() {
    skip();
    int b = pos_;
    if (accept('-')) {
      Expr a = unary();
      return make(Op::Neg, {a}, {b, pos_});
    }
    return power();
  }

  long integer() {
    skip();
    int b = pos_;
    while (pos_ < static_cast<int>(s_.size()) && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (b == pos_) fail("expected an integer exponent");
    return std::stol(s_.substr(b, pos_ - b));
  }

  Expr power() {
    skip();
    int b = pos_;
    Expr base = primary();
    if (!accept('^')) return base;
    long num, den = 1;
    if (accept('(')) {
      bool neg = accept('-');
      num = integer();
      if (neg) num = -num;
      if (accept('/')) den = integer();
      expect(')');
    } else {
      bool neg = accept('-');
      num = integer();
      if (neg) num = -num;
    }
    if (den == 0) fail("zero denominator in exponent");
    long g = std::gcd(num, den);
    if (g == 0) g = 1;
    auto n = std::make_shared<Node>();
    n->op = Op::Pow;
    n->args = {base};
    n->pnum = num / g;
    n->pden = den / g;
    n->span = {b, pos_};
    return n;
  }

  Expr primary() {
    skip();
    int b = pos_;
    if (pos_ >= static_cast<int>(s_.size())) fail("unexpected end of input");
    char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* start = s_.c_str() + pos_;
      char* end = nullptr;
      double v = std::strtod(start, &end);
      if (end == start) fail("malformed number");
      pos_ += static_cast<int>(end - start);
      auto n = std::make_shared<Node>();
      n->op = Op::Num;
      n->num = v;
      n->span = {b, pos_};
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      while (pos_ < static_cast<int>(s_.size()) && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::string id = s_.substr(b, pos_ - b);
      if (is_func(id)) {
        expect('(');
        Expr a = expr();
        expect(')');
        auto n = std::make_shared<Node>();
        n->op = Op::Call;
        n->name = id;
        n->args = {a};
        n->span = {b, pos_};
        return n;
      }
      if (is_var(id)) {
        auto n = std::make_shared<Node>();
        n->op = Op::Var;
        n->name = id;
        n->span = {b, pos_};
        return n;
      }
      pos_ = b;
      fail("unknown identifier '" + id + "'");
    }
    if (accept('(')) {
      Expr e = expr();
      expect(')');
      return e;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  int pos_ = 0;
};

inline int prec(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

inline std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // shortest representation that round-trips
  for (int p = 1; p < 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) {
      s = buf;
      break;
    }
  }
  return s;
}

inline void print(const Node& n, int parent, std::string& out) {
  bool paren = prec(n) < parent;
  if (paren) out += "(";
  switch (n.op) {
    case Op::Num:
      if (n.num < 0) {
        out += "(-" + fmt_num(-n.num) + ")";
      } else {
        out += fmt_num(n.num);
      }
      break;
    case Op::Var: out += n.name; break;
    case Op::Add:
    case Op::Sub:
      print(*n.args[0], 1, out);
      out += n.op == Op::Add ? " + " : " - ";
      print(*n.args[1], 2, out);
      break;
    case Op::Mul:
    case Op::Div:
      print(*n.args[0], 2, out);
      out += n.op == Op::Mul ? "*" : "/";
      print(*n.args[1], 3, out);
      break;
    case Op::Neg:
      out += "-";
      print(*n.args[0], 3, out);
      break;
    case Op::Pow:
      print(*n.args[0], 5, out);
      out += "^";
      if (n.pden == 1 && n.pnum >= 0)
        out += std::to_string(n.pnum);
      else if (n.pden == 1)
        out += "(" + std::to_string(n.pnum) + ")";
      else
        out += "(" + std::to_string(n.pnum) + "/" + std::to_string(n.pden) + ")";
      break;
    case Op::Call:
      out += n.name + "(";
      print(*n.args[0], 0, out);
      out += ")";
      break;
  }
  if (paren) out += ")";
}

}  // namespace detail

inline Expr parse(const std::string& src) { return detail::Parser(src).parse(); }

inline std::string print(const Expr& e) {
  std::string out;
  detail::print(*e, 0, out);
  return out;
}

/// Structural equality, ignoring spans.
inline bool equal(const Expr& a, const Expr& b) {
  if (a->op != b->op || a->args.size() != b->args.size()) return false;
  if (a->op == Op::Num && a->num != b->num) return false;
  if ((a->op == Op::Var || a->op == Op::Call) && a->name != b->name) return false;
  if (a->op == Op::Pow && (a->pnum != b->pnum || a->pden != b->pden)) return false;
  for (std::size_t k = 0; k < a->args.size(); ++k)
    if (!equal(a->args[k], b->args[k])) return false;
  return true;
}

// Index spaces: boson, fermion, full super space.
enum class Space { B, F, S };

struct Type {
  bool scalar = true;
  Space row = Space::B, col = Space::B;

  bool operator==(const Type&) const = default;
  bool square() const { return !scalar && row == col; }
  bool odd() const { return !scalar && row != col; }
};

inline std::string to_string(const Type& t) {
  if (t.scalar) return "scalar";
  auto sp = [](Space s) { return s == Space::B ? "B" : (s == Space::F ? "F" : "S"); };
  return std::string("matrix ") + sp(t.row) + "x" + sp(t.col);
}

inline Type typecheck(const Expr& e) {
  const Node& n = *e;
  switch (n.op) {
    case Op::Num: return {};
    case Op::Var:
      if (n.name == "x") return {false, Space::B, Space::B};
      if (n.name == "y") return {false, Space::F, Space::F};
      if (n.name == "sigma") return {false, Space::B, Space::F};
      if (n.name == "tau") return {false, Space::F, Space::B};
      return {false, Space::S, Space::S};
    case Op::Add:
    case Op::Sub: {
      Type a = typecheck(n.args[0]), b = typecheck(n.args[1]);
      if (!(a == b)) throw TypeError("cannot add " + to_string(a) + " and " + to_string(b), n.span);
      return a;
    }
    case Op::Mul: {
      Type a = typecheck(n.args[0]), b = typecheck(n.args[1]);
      if (a.scalar) return b;
      if (b.scalar) return a;
      if (a.col != b.row)
        throw TypeError("matrix product " + to_string(a) + " * " + to_string(b) + " does not chain", n.span);
      return {false, a.row, b.col};
    }
    case Op::Div: {
      Type a = typecheck(n.args[0]), b = typecheck(n.args[1]);
      if (!b.scalar) throw TypeError("division by a matrix", n.span);
      return a;
    }
    case Op::Neg: return typecheck(n.args[0]);
    case Op::Pow: {
      Type a = typecheck(n.args[0]);
      if (a.scalar) return a;
      if (!a.square()) throw TypeError("power of a non-square or odd matrix", n.span);
      if (n.pden != 1 || n.pnum < 0) throw TypeError("matrix powers must be non-negative integers", n.span);
      return a;
    }
    case Op::Call: {
      Type a = typecheck(n.args[0]);
      const std::string& f = n.name;
      if (f == "exp") {
        if (!a.scalar) throw TypeError("exp takes a scalar", n.span);
        return {};
      }
      if (f == "tr" || f == "det") {
        if (a.scalar || a.odd() || a.row == Space::S)
          throw TypeError(f + " needs an even square block, got " + to_string(a) +
                              (a.row == Space::S ? " (use s" + f + ")" : ""),
                          n.span);
        return {};
      }
      if (a.scalar || a.row != Space::S || a.col != Space::S)
        throw TypeError(f + " needs a full supermatrix, got " + to_string(a), n.span);
      return {};
    }
  }
  throw TypeError("unknown node", n.span);
}

namespace detail {

struct MatVal {
  GMatrix m;
  Space row, col;
};
using Value = std::variant<GrassmannElement, MatVal>;

inline const GMatrix& block_of(const SuperMatrix& Q, const std::string& nm, GMatrix& full) {
  if (nm == "x") return Q.x;
  if (nm == "y") return Q.y;
  if (nm == "sigma") return Q.sigma;
  if (nm == "tau") return Q.tau;
  full = Q.full();
  return full;
}

inline GrassmannElement half_power_of_call(const Node& call, HalfInt e, const SuperMatrix& Q, const Value& arg);

inline Value eval(const Node& n, const SuperMatrix& Q) {
  const auto& ctx = Q.context();
  switch (n.op) {
    case Op::Num: return GrassmannElement(ctx, n.num);
    case Op::Var: {
      GMatrix full;
      const GMatrix& m = block_of(Q, n.name, full);
      Type t = typecheck(std::make_shared<Node>(n));
      return MatVal{m, t.row, t.col};
    }
    case Op::Add:
    case Op::Sub: {
      Value a = eval(*n.args[0], Q), b = eval(*n.args[1], Q);
      double s = n.op == Op::Add ? 1.0 : -1.0;
      if (auto* ea = std::get_if<GrassmannElement>(&a)) return *ea + std::get<GrassmannElement>(b) * s;
      auto& ma = std::get<MatVal>(a);
      auto& mb = std::get<MatVal>(b);
      return MatVal{ma.m + cplx(s) * mb.m, ma.row, ma.col};
    }
    case Op::Mul: {
      Value a = eval(*n.args[0], Q), b = eval(*n.args[1], Q);
      auto* ea = std::get_if<GrassmannElement>(&a);
      auto* eb = std::get_if<GrassmannElement>(&b);
      if (ea && eb) return *ea * *eb;
      if (ea) {
        auto& mb = std::get<MatVal>(b);
        return MatVal{*ea * mb.m, mb.row, mb.col};
      }
      auto& ma = std::get<MatVal>(a);
      if (eb) return MatVal{ma.m * *eb, ma.row, ma.col};
      auto& mb = std::get<MatVal>(b);
      return MatVal{ma.m * mb.m, ma.row, mb.col};
    }
    case Op::Div: {
      Value a = eval(*n.args[0], Q), b = eval(*n.args[1], Q);
      GrassmannElement inv = ginv(std::get<GrassmannElement>(b));
      if (auto* ea = std::get_if<GrassmannElement>(&a)) return *ea * inv;
      auto& ma = std::get<MatVal>(a);
      return MatVal{ma.m * inv, ma.row, ma.col};
    }
    case Op::Neg: {
      Value a = eval(*n.args[0], Q);
      if (auto* ea = std::get_if<GrassmannElement>(&a)) return -*ea;
      auto& ma = std::get<MatVal>(a);
      return MatVal{-ma.m, ma.row, ma.col};
    }
    case Op::Pow: {
      const Node& base = *n.args[0];
      if (base.op == Op::Call && (base.name == "sdet" || base.name == "det")) {
        Value arg = eval(*base.args[0], Q);
        return half_power_of_call(base, HalfInt::from_rational(n.pnum, n.pden), Q, arg);
      }
      Value a = eval(base, Q);
      if (auto* ea = std::get_if<GrassmannElement>(&a)) {
        if (n.pden == 1 && n.pnum < 0) return power(ginv(*ea), static_cast<int>(-n.pnum));
        return gpow(*ea, double(n.pnum) / double(n.pden));
      }
      auto& ma = std::get<MatVal>(a);
      GMatrix r = GMatrix::identity(ctx, ma.m.rows());
      for (long k = 0; k < n.pnum; ++k) r = r * ma.m;
      return MatVal{r, ma.row, ma.col};
    }
    case Op::Call: {
      Value a = eval(*n.args[0], Q);
      if (n.name == "exp") return gexp(std::get<GrassmannElement>(a));
      auto& ma = std::get<MatVal>(a);
      if (n.name == "tr") return ma.m.trace();
      if (n.name == "det") return half_power_of_call(n, HalfInt{2}, Q, a);
      SuperMatrix sq = SuperMatrix::from_full(Q.cls, Q.p, Q.q, ma.m);
      if (n.name == "str") return sq.str();
      return sdet_power(sq, HalfInt{2});
    }
  }
  throw std::logic_error("unknown node");
}

inline GrassmannElement half_power_of_call(const Node& call, HalfInt e, const SuperMatrix& Q, const Value& arg) {
  const auto& ma = std::get<MatVal>(arg);
  if (call.name == "sdet") return sdet_power(SuperMatrix::from_full(Q.cls, Q.p, Q.q, ma.m), e);
  MatC store;
  const MatC* form = ma.row == Space::F ? half_power_form(Q.cls, Q.q, store) : nullptr;
  return det_power(ma.m, e, form);
}

}  // namespace detail

/// Evaluates a scalar expression at Q. Typechecks first.
inline GrassmannElement eval(const Expr& e, const SuperMatrix& Q) {
  Type t = typecheck(e);
  if (!t.scalar) throw TypeError("integrand must be scalar, got " + to_string(t), e->span);
  return std::get<GrassmannElement>(detail::eval(*e, Q));
}

}  // namespace sbos::expr

#endif
