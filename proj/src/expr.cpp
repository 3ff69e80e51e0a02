#include "agediff/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace agediff::expr {

namespace {

struct Token {
  enum class Type { number, ident, op, lparen, rparen, end };
  Type type = Type::end;
  double value = 0.0;
  std::string text;
  char op = 0;
  int line = 0, col = 0;
};

[[noreturn]] void fail(int line, int col, const std::string& msg) {
  std::ostringstream os;
  os << "expression error at line " << line << ", column " << col << ": " << msg;
  throw Error(os.str());
}

class Lexer {
 public:
  Lexer(const std::string& src, int line0, int col0)
      : src_(src), line0_(line0), col0_(col0) {}

  Token next() {
    while (i_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[i_])))
      advance();
    Token t;
    t.line = abs_line();
    t.col = abs_col();
    if (i_ >= src_.size()) {
      t.type = Token::Type::end;
      return t;
    }
    const char ch = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(ch)) ||
        (ch == '.' && i_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      const char* begin = src_.c_str() + i_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail(t.line, t.col, "malformed numeric literal");
      if (!std::isfinite(v)) fail(t.line, t.col, "numeric literal out of range");
      t.type = Token::Type::number;
      t.value = v;
      t.text.assign(begin, static_cast<std::size_t>(end - begin));
      for (const char* p = begin; p != end; ++p) advance();
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      while (i_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_')) {
        t.text.push_back(src_[i_]);
        advance();
      }
      t.type = Token::Type::ident;
      return t;
    }
    advance();
    switch (ch) {
      case '+':
      case '-':
      case '*':
      case '/':
      case '^':
        t.type = Token::Type::op;
        t.op = ch;
        return t;
      case '(':
        t.type = Token::Type::lparen;
        return t;
      case ')':
        t.type = Token::Type::rparen;
        return t;
      default:
        fail(t.line, t.col, std::string("unexpected character '") + ch + "'");
    }
  }

 private:
  int abs_line() const { return line0_ + line_ - 1; }
  int abs_col() const { return line_ == 1 ? col0_ + col_ - 1 : col_; }
  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  const std::string& src_;
  std::size_t i_ = 0;
  int line_ = 1, col_ = 1;
  int line0_, col0_;
};

class Parser {
 public:
  Parser(const std::string& src, int line0, int col0) : lex_(src, line0, col0) {
    cur_ = lex_.next();
  }

  std::unique_ptr<Node> run() {
    auto e = parse_sum();
    if (cur_.type != Token::Type::end)
      fail(cur_.line, cur_.col, "unexpected trailing input");
    return e;
  }

 private:
  Token eat() {
    Token t = cur_;
    cur_ = lex_.next();
    return t;
  }

  std::unique_ptr<Node> make_binary(const Token& t, std::unique_ptr<Node> l,
                                    std::unique_ptr<Node> r) {
    auto n = std::make_unique<Node>();
    n->kind = Node::Kind::binary;
    n->op = t.op;
    n->line = t.line;
    n->col = t.col;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
  }

  std::unique_ptr<Node> parse_sum() {
    auto lhs = parse_product();
    while (cur_.type == Token::Type::op && (cur_.op == '+' || cur_.op == '-')) {
      const Token t = eat();
      lhs = make_binary(t, std::move(lhs), parse_product());
    }
    return lhs;
  }

  std::unique_ptr<Node> parse_product() {
    auto lhs = parse_signed();
    while (cur_.type == Token::Type::op && (cur_.op == '*' || cur_.op == '/')) {
      const Token t = eat();
      lhs = make_binary(t, std::move(lhs), parse_signed());
    }
    return lhs;
  }

  std::unique_ptr<Node> parse_signed() {
    if (cur_.type == Token::Type::op && (cur_.op == '+' || cur_.op == '-')) {
      const Token t = eat();
      auto inner = parse_signed();
      if (t.op == '+') return inner;
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::unary_minus;
      n->line = t.line;
      n->col = t.col;
      n->lhs = std::move(inner);
      return n;
    }
    return parse_power();
  }

  std::unique_ptr<Node> parse_power() {
    auto base = parse_primary();
    if (cur_.type == Token::Type::op && cur_.op == '^') {
      const Token t = eat();
      // right-associative; the exponent may carry its own sign
      return make_binary(t, std::move(base), parse_signed());
    }
    return base;
  }

  std::unique_ptr<Node> parse_primary() {
    if (cur_.type == Token::Type::number) {
      const Token t = eat();
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::number;
      n->value = t.value;
      n->line = t.line;
      n->col = t.col;
      return n;
    }
    if (cur_.type == Token::Type::ident) {
      const Token t = eat();
      if (cur_.type == Token::Type::lparen) {
        if (t.text != "exp" && t.text != "sin" && t.text != "cos" &&
            t.text != "sqrt")
          fail(t.line, t.col,
               "unknown function '" + t.text + "' (expected exp, sin, cos, sqrt)");
        eat();  // '('
        auto arg = parse_sum();
        if (cur_.type != Token::Type::rparen)
          fail(cur_.line, cur_.col, "expected ')' to close '" + t.text + "('");
        eat();
        auto n = std::make_unique<Node>();
        n->kind = Node::Kind::call;
        n->name = t.text;
        n->line = t.line;
        n->col = t.col;
        n->lhs = std::move(arg);
        return n;
      }
      if (t.text != "a" && t.text != "x")
        fail(t.line, t.col,
             "unknown identifier '" + t.text + "' (variables are a and x)");
      auto n = std::make_unique<Node>();
      n->kind = Node::Kind::variable;
      n->name = t.text;
      n->line = t.line;
      n->col = t.col;
      return n;
    }
    if (cur_.type == Token::Type::lparen) {
      eat();
      auto inner = parse_sum();
      if (cur_.type != Token::Type::rparen)
        fail(cur_.line, cur_.col, "expected ')'");
      eat();
      return inner;
    }
    if (cur_.type == Token::Type::end)
      fail(cur_.line, cur_.col, "unexpected end of expression");
    fail(cur_.line, cur_.col, "expected a number, variable, function, or '('");
  }

  Lexer lex_;
  Token cur_;
};

double eval_node(const Node* n, double a, double x) {
  switch (n->kind) {
    case Node::Kind::number:
      return n->value;
    case Node::Kind::variable:
      return n->name == "a" ? a : x;
    case Node::Kind::unary_minus:
      return -eval_node(n->lhs.get(), a, x);
    case Node::Kind::binary: {
      const double l = eval_node(n->lhs.get(), a, x);
      const double r = eval_node(n->rhs.get(), a, x);
      switch (n->op) {
        case '+': return l + r;
        case '-': return l - r;
        case '*': return l * r;
        case '/':
          if (r == 0.0) fail(n->line, n->col, "division by zero");
          return l / r;
        case '^': return std::pow(l, r);
      }
      fail(n->line, n->col, "corrupt operator node");
    }
    case Node::Kind::call: {
      const double v = eval_node(n->lhs.get(), a, x);
      if (n->name == "exp") return std::exp(v);
      if (n->name == "sin") return std::sin(v);
      if (n->name == "cos") return std::cos(v);
      if (v < 0.0) fail(n->line, n->col, "square root of a negative number");
      return std::sqrt(v);
    }
  }
  fail(n->line, n->col, "corrupt expression node");
}

std::string number_text(double v) {
  // shortest representation that round-trips the value
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void print_node(const Node* n, std::string& out) {
  switch (n->kind) {
    case Node::Kind::number:
      out += number_text(n->value);
      return;
    case Node::Kind::variable:
      out += n->name;
      return;
    case Node::Kind::unary_minus:
      out += "(-";
      print_node(n->lhs.get(), out);
      out += ')';
      return;
    case Node::Kind::binary:
      out += '(';
      print_node(n->lhs.get(), out);
      out += ' ';
      out += n->op;
      out += ' ';
      print_node(n->rhs.get(), out);
      out += ')';
      return;
    case Node::Kind::call:
      out += n->name;
      out += '(';
      print_node(n->lhs.get(), out);
      out += ')';
      return;
  }
}

}  // namespace

Expression Expression::parse(const std::string& text, int line0, int col0) {
  Parser p(text, line0, col0);
  Expression e;
  e.root_ = std::shared_ptr<const Node>(p.run().release());
  return e;
}

double Expression::eval(double a, double x) const {
  if (!root_) throw Error("evaluating an empty expression");
  return eval_node(root_.get(), a, x);
}

std::string Expression::to_string() const {
  if (!root_) return "";
  std::string out;
  print_node(root_.get(), out);
  return out;
}

bool structurally_equal(const Node* a, const Node* b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case Node::Kind::number:
      return a->value == b->value;
    case Node::Kind::variable:
      return a->name == b->name;
    case Node::Kind::unary_minus:
      return structurally_equal(a->lhs.get(), b->lhs.get());
    case Node::Kind::binary:
      return a->op == b->op && structurally_equal(a->lhs.get(), b->lhs.get()) &&
             structurally_equal(a->rhs.get(), b->rhs.get());
    case Node::Kind::call:
      return a->name == b->name && structurally_equal(a->lhs.get(), b->lhs.get());
  }
  return false;
}

}  // namespace agediff::expr
