#include "gml/label_expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include <fmt/format.h>

#include "gml/errors.hpp"

namespace gml {

class LabelExprParser {
 public:
  explicit LabelExprParser(std::string_view s) : s_(s) {}

  std::vector<LabelExpr::Instr> run() {
    expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return std::move(code_);
  }

 private:
  using Op = LabelExpr::Op;

  [[noreturn]] void fail(const char* what) const {
    throw PreconditionError(fmt::format("label expression '{}': {} at offset {}", s_, what, pos_));
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!eat(c)) fail(fmt::format("expected '{}'", c).c_str());
  }

  void expr() {
    term();
    for (;;) {
      if (eat('+')) {
        term();
        code_.push_back({Op::Add});
      } else if (eat('-')) {
        term();
        code_.push_back({Op::Sub});
      } else {
        return;
      }
    }
  }

  void term() {
    factor();
    while (eat('*')) {
      factor();
      code_.push_back({Op::Mul});
    }
  }

  void factor() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    if (eat('-')) {
      factor();
      code_.push_back({Op::Neg});
      return;
    }
    if (eat('(')) {
      expr();
      expect(')');
      return;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
      if (ec != std::errc()) fail("bad number");
      pos_ = static_cast<std::size_t>(ptr - s_.data());
      code_.push_back({Op::Const, v});
      return;
    }
    std::size_t end = pos_;
    while (end < s_.size() && std::isalpha(static_cast<unsigned char>(s_[end]))) ++end;
    const std::string_view word = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (word == "u") {
      code_.push_back({Op::Label});
    } else if (word == "min" || word == "max") {
      expect('(');
      expr();
      expect(',');
      expr();
      expect(')');
      code_.push_back({word == "min" ? Op::Min : Op::Max});
    } else {
      fail("unknown identifier");
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::vector<LabelExpr::Instr> code_;
};

LabelExpr::LabelExpr(double constant)
    : text_(fmt::format("{}", constant)), code_{{Op::Const, constant}}, constant_(true) {}

LabelExpr LabelExpr::parse(std::string_view text) {
  LabelExpr e;
  e.code_ = LabelExprParser(text).run();
  int depth = 0, peak = 0;
  for (const Instr& i : e.code_) {
    depth += (i.op == Op::Const || i.op == Op::Label) ? 1 : (i.op == Op::Neg ? 0 : -1);
    peak = std::max(peak, depth);
  }
  if (peak > 64) throw PreconditionError("label expression nested too deeply");
  e.text_ = std::string(text);
  e.constant_ = std::none_of(e.code_.begin(), e.code_.end(),
                             [](const Instr& i) { return i.op == Op::Label; });
  return e;
}

double LabelExpr::operator()(double u) const {
  double stack[64];
  int top = 0;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::Const:
        stack[top++] = in.value;
        break;
      case Op::Label:
        stack[top++] = u;
        break;
      case Op::Neg:
        stack[top - 1] = -stack[top - 1];
        break;
      default: {
        const double b = stack[--top];
        double& a = stack[top - 1];
        switch (in.op) {
          case Op::Add: a += b; break;
          case Op::Sub: a -= b; break;
          case Op::Mul: a *= b; break;
          case Op::Min: a = std::min(a, b); break;
          case Op::Max: a = std::max(a, b); break;
          default: break;
        }
      }
    }
  }
  return stack[0];
}

}  // namespace gml
