#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "qflat/core.hpp"

namespace qflat {

/// Syntax error, unknown identifier or arity mismatch. `position` is the
/// 0-based byte offset into the source where the problem was detected.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t position)
      : InputError(what + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Field formula over the free symbols x1..xn and r = |x|.
///
/// Grammar:
///   expr  := term (('+'|'-') term)*
///   term  := unary (('*'|'/') unary)*
///   unary := '-' unary | power
///   power := atom ('^' unary)?
///   atom  := number | ident | ident '(' args ')' | '(' expr ')'
/// Functions: log, exp, sqrt, atan, pow, min, max, cutoff(r, a, b).
///
/// Evaluation is total on the domain: log/sqrt/pow outside their domain and
/// non-finite results raise DomainError instead of producing NaN.
class Expression {
 public:
  struct Node;

  static Expression parse(std::string_view src, Dimension dim);

  double evaluate(std::span<const double> x) const;

  /// Fully parenthesized source that parses back to an identical tree.
  std::string print() const;

  /// True when the formula mentions no coordinate symbol except r.
  bool depends_only_on_radius() const;

  Dimension dim() const { return Dimension(n_); }

 private:
  Expression(std::shared_ptr<const Node> root, int n) : root_(std::move(root)), n_(n) {}

  std::shared_ptr<const Node> root_;
  int n_;
};

/// C-infinity cutoff: 1 for r <= a, 0 for r >= b, smooth monotone in between.
/// cutoff(r,a,b) = 1 - S((r-a)/(b-a)), S(t) = s(t)/(s(t)+s(1-t)), s(t) = exp(-1/t) for t > 0.
double smooth_cutoff(double r, double a, double b);

}  // namespace qflat
