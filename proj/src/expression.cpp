#include "qflat/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <vector>

namespace qflat {

struct Expression::Node {
  enum class Kind { Number, Coord, Radius, Neg, Add, Sub, Mul, Div, Pow, Call };
  enum class Func { Log, Exp, Sqrt, Atan, Pow, Min, Max, Cutoff };

  Kind kind;
  double value = 0.0;  // Number
  int index = 0;       // Coord: 0-based
  Func func = Func::Log;
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

struct FuncInfo {
  const char* name;
  Node::Func func;
  int arity;
};

constexpr FuncInfo kFunctions[] = {
    {"log", Node::Func::Log, 1},   {"exp", Node::Func::Exp, 1}, {"sqrt", Node::Func::Sqrt, 1},
    {"atan", Node::Func::Atan, 1}, {"pow", Node::Func::Pow, 2}, {"min", Node::Func::Min, 2},
    {"max", Node::Func::Max, 2},   {"cutoff", Node::Func::Cutoff, 3},
};

NodePtr make(Node::Kind kind, std::vector<NodePtr> args = {}) {
  auto node = std::make_shared<Node>();
  node->kind = kind;
  node->args = std::move(args);
  return node;
}

class Parser {
 public:
  Parser(std::string_view src, int n) : src_(src), n_(n) {}

  NodePtr parse() {
    skip();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    auto e = expr();
    skip();
    if (pos_ != src_.size()) throw ParseError(std::string("unexpected '") + src_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= src_.size()) throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  NodePtr expr() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Node::Kind::Add, {lhs, term()});
      } else if (accept('-')) {
        lhs = make(Node::Kind::Sub, {lhs, term()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Node::Kind::Mul, {lhs, unary()});
      } else if (accept('/')) {
        lhs = make(Node::Kind::Div, {lhs, unary()});
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Node::Kind::Neg, {unary()});
    return power();
  }

  NodePtr power() {
    auto base = atom();
    if (accept('^')) return make(Node::Kind::Pow, {base, unary()});
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      auto e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  NodePtr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = 0;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        ++pos_;
        ++k;
      }
      return k;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) throw ParseError("malformed number", start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) pos_ = save;  // "2e" is 2 followed by an identifier; let the caller fail
    }
    const std::string text(src_.substr(start, pos_ - start));
    auto node = std::make_shared<Node>();
    node->kind = Node::Kind::Number;
    node->value = std::strtod(text.c_str(), nullptr);
    if (!std::isfinite(node->value)) throw ParseError("number out of range", start);
    return node;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(src_.substr(start, pos_ - start));
    skip();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      for (const auto& info : kFunctions) {
        if (name == info.name) return call(info, start);
      }
      throw ParseError("unknown function '" + name + "'", start);
    }
    if (name == "r") return make(Node::Kind::Radius);
    if (name.size() >= 2 && name[0] == 'x') {
      bool all_digits = true;
      for (std::size_t i = 1; i < name.size(); ++i) {
        all_digits = all_digits && std::isdigit(static_cast<unsigned char>(name[i]));
      }
      if (all_digits && name[1] != '0') {
        const int idx = std::atoi(name.c_str() + 1);
        if (idx >= 1 && idx <= n_) {
          auto node = make(Node::Kind::Coord);
          std::const_pointer_cast<Node>(node)->index = idx - 1;
          return node;
        }
      }
    }
    throw ParseError("unknown identifier '" + name + "'", start);
  }

  NodePtr call(const FuncInfo& info, std::size_t start) {
    expect('(');
    std::vector<NodePtr> args;
    if (!accept(')')) {
      args.push_back(expr());
      while (accept(',')) args.push_back(expr());
      expect(')');
    }
    if (static_cast<int>(args.size()) != info.arity) {
      throw ParseError(std::string(info.name) + " expects " + std::to_string(info.arity) +
                           " argument(s), got " + std::to_string(args.size()),
                       start);
    }
    auto node = make(Node::Kind::Call, std::move(args));
    std::const_pointer_cast<Node>(node)->func = info.func;
    return node;
  }

  std::string_view src_;
  int n_;
  std::size_t pos_ = 0;
};

double checked(double v, const char* op) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + op);
  return v;
}

double eval(const Node& node, std::span<const double> x, double r) {
  using K = Node::Kind;
  switch (node.kind) {
    case K::Number:
      return node.value;
    case K::Coord:
      return x[node.index];
    case K::Radius:
      return r;
    case K::Neg:
      return -eval(*node.args[0], x, r);
    case K::Add:
      return checked(eval(*node.args[0], x, r) + eval(*node.args[1], x, r), "+");
    case K::Sub:
      return checked(eval(*node.args[0], x, r) - eval(*node.args[1], x, r), "-");
    case K::Mul:
      return checked(eval(*node.args[0], x, r) * eval(*node.args[1], x, r), "*");
    case K::Div: {
      const double den = eval(*node.args[1], x, r);
      if (den == 0.0) throw DomainError("division by zero");
      return checked(eval(*node.args[0], x, r) / den, "/");
    }
    case K::Pow: {
      const double b = eval(*node.args[0], x, r);
      const double e = eval(*node.args[1], x, r);
      if (b < 0.0 && e != std::floor(e)) throw DomainError("negative base with non-integer exponent");
      if (b == 0.0 && e < 0.0) throw DomainError("zero base with negative exponent");
      return checked(std::pow(b, e), "^");
    }
    case K::Call:
      break;
  }
  using F = Node::Func;
  const double a = eval(*node.args[0], x, r);
  switch (node.func) {
    case F::Log:
      if (!(a > 0.0)) throw DomainError("log of non-positive argument");
      return std::log(a);
    case F::Exp:
      return checked(std::exp(a), "exp");
    case F::Sqrt:
      if (a < 0.0) throw DomainError("sqrt of negative argument");
      return std::sqrt(a);
    case F::Atan:
      return std::atan(a);
    case F::Pow: {
      const double e = eval(*node.args[1], x, r);
      if (a < 0.0 && e != std::floor(e)) throw DomainError("negative base with non-integer exponent");
      if (a == 0.0 && e < 0.0) throw DomainError("zero base with negative exponent");
      return checked(std::pow(a, e), "pow");
    }
    case F::Min:
      return std::min(a, eval(*node.args[1], x, r));
    case F::Max:
      return std::max(a, eval(*node.args[1], x, r));
    case F::Cutoff: {
      const double lo = eval(*node.args[1], x, r);
      const double hi = eval(*node.args[2], x, r);
      if (!(hi > lo)) throw DomainError("cutoff requires a < b");
      return smooth_cutoff(a, lo, hi);
    }
  }
  return 0.0;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print(const Node& node, std::string& out) {
  using K = Node::Kind;
  auto binary = [&](const char* op) {
    out += '(';
    print(*node.args[0], out);
    out += op;
    print(*node.args[1], out);
    out += ')';
  };
  switch (node.kind) {
    case K::Number:
      out += format_number(node.value);
      return;
    case K::Coord:
      out += 'x';
      out += std::to_string(node.index + 1);
      return;
    case K::Radius:
      out += 'r';
      return;
    case K::Neg:
      out += "(-";
      print(*node.args[0], out);
      out += ')';
      return;
    case K::Add:
      return binary(" + ");
    case K::Sub:
      return binary(" - ");
    case K::Mul:
      return binary(" * ");
    case K::Div:
      return binary(" / ");
    case K::Pow:
      return binary(" ^ ");
    case K::Call:
      break;
  }
  for (const auto& info : kFunctions) {
    if (info.func == node.func) out += info.name;
  }
  out += '(';
  for (std::size_t i = 0; i < node.args.size(); ++i) {
    if (i > 0) out += ", ";
    print(*node.args[i], out);
  }
  out += ')';
}

bool only_radius(const Node& node) {
  if (node.kind == Node::Kind::Coord) return false;
  for (const auto& a : node.args) {
    if (!only_radius(*a)) return false;
  }
  return true;
}

double sigma(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

}  // namespace

double smooth_cutoff(double r, double a, double b) {
  const double t = (r - a) / (b - a);
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double s0 = sigma(t);
  const double s1 = sigma(1.0 - t);
  return 1.0 - s0 / (s0 + s1);
}

Expression Expression::parse(std::string_view src, Dimension dim) {
  Parser p(src, dim.value());
  return Expression(p.parse(), dim.value());
}

double Expression::evaluate(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != n_) {
    throw DimensionError("expression over R^" + std::to_string(n_) + " evaluated at a point of R^" +
                         std::to_string(x.size()));
  }
  return eval(*root_, x, norm(x));
}

std::string Expression::print() const {
  std::string out;
  qflat::print(*root_, out);
  return out;
}

bool Expression::depends_only_on_radius() const { return only_radius(*root_); }

}  // namespace qflat
