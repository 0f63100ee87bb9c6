#include "expr.hpp"

#include "clfstab/common.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

namespace clfstab::cli {

struct Expr::Node {
  enum class Op { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 };
  Op op{Op::Number};
  double value{0.0};
  int index{0};
  double (*fn1)(double){nullptr};
  double (*fn2)(double, double){nullptr};
  std::shared_ptr<const Node> a, b;

  double eval(const double* v) const {
    switch (op) {
      case Op::Number: return value;
      case Op::Variable: return v[index];
      case Op::Neg: return -a->eval(v);
      case Op::Add: return a->eval(v) + b->eval(v);
      case Op::Sub: return a->eval(v) - b->eval(v);
      case Op::Mul: return a->eval(v) * b->eval(v);
      case Op::Div: return a->eval(v) / b->eval(v);
      case Op::Pow: return std::pow(a->eval(v), b->eval(v));
      case Op::Call1: return fn1(a->eval(v));
      case Op::Call2: return fn2(a->eval(v), b->eval(v));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;
using Op = Expr::Node::Op;

double sign_fn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
double abs_fn(double x) { return std::fabs(x); }
double sin_fn(double x) { return std::sin(x); }
double cos_fn(double x) { return std::cos(x); }
double tan_fn(double x) { return std::tan(x); }
double asin_fn(double x) { return std::asin(x); }
double acos_fn(double x) { return std::acos(x); }
double atan_fn(double x) { return std::atan(x); }
double sinh_fn(double x) { return std::sinh(x); }
double cosh_fn(double x) { return std::cosh(x); }
double tanh_fn(double x) { return std::tanh(x); }
double exp_fn(double x) { return std::exp(x); }
double log_fn(double x) { return std::log(x); }
double sqrt_fn(double x) { return std::sqrt(x); }
double cbrt_fn(double x) { return std::cbrt(x); }
double min_fn(double x, double y) { return std::fmin(x, y); }
double max_fn(double x, double y) { return std::fmax(x, y); }
double pow_fn(double x, double y) { return std::pow(x, y); }
double atan2_fn(double x, double y) { return std::atan2(x, y); }

struct Unary {
  const char* name;
  double (*fn)(double);
};
constexpr Unary kUnary[] = {{"sin", sin_fn},   {"cos", cos_fn},   {"tan", tan_fn},   {"asin", asin_fn},
                            {"acos", acos_fn}, {"atan", atan_fn}, {"sinh", sinh_fn}, {"cosh", cosh_fn},
                            {"tanh", tanh_fn}, {"exp", exp_fn},   {"log", log_fn},   {"sqrt", sqrt_fn},
                            {"cbrt", cbrt_fn}, {"abs", abs_fn},   {"sign", sign_fn}};
struct Binary {
  const char* name;
  double (*fn)(double, double);
};
constexpr Binary kBinary[] = {{"min", min_fn}, {"max", max_fn}, {"pow", pow_fn}, {"atan2", atan2_fn}};

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expr::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& vars) : s_(text), vars_(vars) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Validation, "expression '" + s_ + "': " + msg + " at offset " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+')) {
        n = make(Op::Add, n, term());
      } else if (accept('-')) {
        n = make(Op::Sub, n, term());
      } else {
        return n;
      }
    }
  }
  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) {
        n = make(Op::Mul, n, unary());
      } else if (accept('/')) {
        n = make(Op::Div, n, unary());
      } else {
        return n;
      }
    }
  }
  NodePtr unary() {
    if (accept('-')) return make(Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }
  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make(Op::Pow, base, unary());
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (accept('(')) {
      NodePtr n = expr();
      expect(')');
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Expr::Node>();
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      if (accept('(')) return call(id);
      for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i] == id) {
          auto n = std::make_shared<Expr::Node>();
          n->op = Op::Variable;
          n->index = static_cast<int>(i);
          return n;
        }
      }
      auto n = std::make_shared<Expr::Node>();
      if (id == "pi") {
        n->value = std::numbers::pi;
      } else if (id == "e") {
        n->value = std::numbers::e;
      } else {
        fail("unknown identifier '" + id + "'");
      }
      return n;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }
  NodePtr call(const std::string& id) {
    for (const auto& u : kUnary) {
      if (id == u.name) {
        auto n = std::make_shared<Expr::Node>();
        n->op = Op::Call1;
        n->fn1 = u.fn;
        n->a = expr();
        expect(')');
        return n;
      }
    }
    for (const auto& b : kBinary) {
      if (id == b.name) {
        auto n = std::make_shared<Expr::Node>();
        n->op = Op::Call2;
        n->fn2 = b.fn;
        n->a = expr();
        expect(',');
        n->b = expr();
        expect(')');
        return n;
      }
    }
    fail("unknown function '" + id + "'");
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  std::size_t pos_{0};
};

}  // namespace

Expr Expr::compile(const std::string& text, const std::vector<std::string>& variables) {
  Expr e;
  e.text_ = text;
  e.root_ = Parser(e.text_, variables).parse();
  return e;
}

double Expr::operator()(const double* values) const { return root_->eval(values); }

std::string trim(const std::string& text) {
  std::size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return text.substr(b, e - b);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t at = text.find(sep, start);
    out.push_back(trim(text.substr(start, at == std::string::npos ? std::string::npos : at - start)));
    if (at == std::string::npos) break;
    start = at + 1;
  }
  return out;
}

}  // namespace clfstab::cli
