#pragma once

#include "agediff/model.hpp"

#include <memory>
#include <string>

namespace agediff::expr {

/// AST node of the coefficient expression language: numeric literals, the
/// variables a (age) and x (position), operators + - * / ^ with the usual
/// precedence (^ binds tightest and associates right), parentheses, and the
/// functions exp, sin, cos, sqrt.
struct Node {
  enum class Kind { number, variable, unary_minus, binary, call };
  Kind kind = Kind::number;
  double value = 0.0;              ///< number
  std::string name;                ///< variable or function
  char op = 0;                     ///< binary operator
  std::unique_ptr<Node> lhs, rhs;  ///< operands (unary/call use lhs only)
  int line = 0, col = 0;           ///< position in the enclosing source
};

/// Immutable parsed expression; copyable (shares the AST).
class Expression {
 public:
  Expression() = default;

  /// Parse `text`, reporting positions offset by (line0, col0) so diagnostics
  /// point into an enclosing file. Throws Error with line/column on syntax
  /// errors, unknown identifiers, and unknown functions.
  static Expression parse(const std::string& text, int line0 = 1, int col0 = 1);

  /// Evaluate at (a, x). Throws Error (with the node position) on division by
  /// zero and square roots of negative numbers.
  double eval(double a, double x) const;

  /// Canonical fully parenthesized form; re-parsing it yields a structurally
  /// identical AST.
  std::string to_string() const;

  bool empty() const { return !root_; }
  const Node* root() const { return root_.get(); }

 private:
  std::shared_ptr<const Node> root_;
};

/// Structural equality, ignoring source positions.
bool structurally_equal(const Node* a, const Node* b);

}  // namespace agediff::expr
