#pragma once

// Minimal expression evaluator for config-supplied scalar coefficients in the
// variables t, y, z. Grammar: + - * / ^ (right-assoc), unary minus,
// parentheses, numbers, pi, and the functions sin cos tan abs sqrt exp log
// sign. Parse errors throw ConfigError with a character position.

#include <glevy/types.hpp>

#include <memory>
#include <string>

namespace glevy {

class Expr {
 public:
  static Expr parse(const std::string& text);
  double eval(double t, double y, double z) const;
  const std::string& source() const { return source_; }

  Expr();
  Expr(Expr&&) noexcept;
  Expr& operator=(Expr&&) noexcept;
  ~Expr();

  struct Node;

 private:
  std::unique_ptr<Node> root_;
  std::string source_;
};

}  // namespace glevy
