#include <glevy/expr.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace glevy {

struct Expr::Node {
  enum class Kind { number, var_t, var_y, var_z, add, sub, mul, div, pow, neg, call };
  Kind kind;
  double value = 0.0;
  int func = 0;  // index into the function table
  std::unique_ptr<Node> lhs, rhs;
};

namespace {

using Node = Expr::Node;

struct FuncEntry {
  const char* name;
  double (*fn)(double);
};

double sign_fn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

const FuncEntry kFuncs[] = {
    {"sin", std::sin}, {"cos", std::cos},   {"tan", std::tan}, {"abs", std::fabs},
    {"sqrt", std::sqrt}, {"exp", std::exp}, {"log", std::log}, {"sign", sign_fn},
};

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  std::unique_ptr<Node> run() {
    auto n = expression();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression error at position " + std::to_string(pos_) + ": " + what +
                      " in '" + text_ + "'");
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

  std::unique_ptr<Node> expression() {
    auto lhs = term();
    for (;;) {
      if (eat('+'))
        lhs = binary(Node::Kind::add, std::move(lhs), term());
      else if (eat('-'))
        lhs = binary(Node::Kind::sub, std::move(lhs), term());
      else
        return lhs;
    }
  }

  std::unique_ptr<Node> term() {
    auto lhs = factor();
    for (;;) {
      if (eat('*'))
        lhs = binary(Node::Kind::mul, std::move(lhs), factor());
      else if (eat('/'))
        lhs = binary(Node::Kind::div, std::move(lhs), factor());
      else
        return lhs;
    }
  }

  // '^' is right-associative and binds tighter than unary minus on its left:
  // -2^2 parses as -(2^2), while exponents may carry their own sign.
  std::unique_ptr<Node> factor() { return unary(); }

  std::unique_ptr<Node> unary() {
    if (eat('-')) {
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::neg;
      n->lhs = unary();
      return n;
    }
    (void)eat('+');
    return power();
  }

  std::unique_ptr<Node> power() {
    auto base = primary();
    if (eat('^')) return binary(Node::Kind::pow, std::move(base), unary());
    return base;
  }

  std::unique_ptr<Node> primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto n = expression();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected character");
  }

  std::unique_ptr<Node> number() {
    const char* start = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(start, &end);
    if (end == start) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - start);
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::number;
    n->value = v;
    return n;
  }

  std::unique_ptr<Node> identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name = text_.substr(start, pos_ - start);
    auto n = std::make_unique<Node>();
    if (name == "t") {
      n->kind = Node::Kind::var_t;
      return n;
    }
    if (name == "y") {
      n->kind = Node::Kind::var_y;
      return n;
    }
    if (name == "z") {
      n->kind = Node::Kind::var_z;
      return n;
    }
    if (name == "pi") {
      n->kind = Node::Kind::number;
      n->value = 3.14159265358979323846;
      return n;
    }
    for (std::size_t f = 0; f < std::size(kFuncs); ++f) {
      if (name == kFuncs[f].name) {
        if (!eat('(')) fail("expected '(' after function name");
        n->kind = Node::Kind::call;
        n->func = static_cast<int>(f);
        n->lhs = expression();
        if (!eat(')')) fail("expected ')'");
        return n;
      }
    }
    fail("unknown identifier '" + name + "'");
  }

  static std::unique_ptr<Node> binary(Node::Kind kind, std::unique_ptr<Node> lhs,
                                      std::unique_ptr<Node> rhs) {
    auto n = std::make_unique<Node>();
    n->kind = kind;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

double eval_node(const Node& n, double t, double y, double z) {
  switch (n.kind) {
    case Node::Kind::number: return n.value;
    case Node::Kind::var_t: return t;
    case Node::Kind::var_y: return y;
    case Node::Kind::var_z: return z;
    case Node::Kind::add: return eval_node(*n.lhs, t, y, z) + eval_node(*n.rhs, t, y, z);
    case Node::Kind::sub: return eval_node(*n.lhs, t, y, z) - eval_node(*n.rhs, t, y, z);
    case Node::Kind::mul: return eval_node(*n.lhs, t, y, z) * eval_node(*n.rhs, t, y, z);
    case Node::Kind::div: return eval_node(*n.lhs, t, y, z) / eval_node(*n.rhs, t, y, z);
    case Node::Kind::pow: return std::pow(eval_node(*n.lhs, t, y, z), eval_node(*n.rhs, t, y, z));
    case Node::Kind::neg: return -eval_node(*n.lhs, t, y, z);
    case Node::Kind::call: return kFuncs[n.func].fn(eval_node(*n.lhs, t, y, z));
  }
  return 0.0;
}

}  // namespace

Expr::Expr() = default;
Expr::Expr(Expr&&) noexcept = default;
Expr& Expr::operator=(Expr&&) noexcept = default;
Expr::~Expr() = default;

Expr Expr::parse(const std::string& text) {
  Expr e;
  e.source_ = text;
  e.root_ = Parser(text).run();
  return e;
}

double Expr::eval(double t, double y, double z) const {
  if (!root_) throw std::logic_error("evaluating an empty expression");
  return eval_node(*root_, t, y, z);
}

}  // namespace glevy
