#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gml {

// Restricted arithmetic in the label u: numbers, u, + - *, unary minus,
// parentheses, min(a,b), max(a,b). Parsed once, evaluated many times.
class LabelExpr {
 public:
  LabelExpr() : LabelExpr(0.0) {}
  explicit LabelExpr(double constant);
  static LabelExpr parse(std::string_view text);

  double operator()(double u) const;
  const std::string& text() const { return text_; }
  bool is_constant() const { return constant_; }

 private:
  enum class Op { Const, Label, Add, Sub, Mul, Neg, Min, Max };
  struct Instr {
    Op op;
    double value = 0.0;
  };
  friend class LabelExprParser;

  std::string text_;
  std::vector<Instr> code_;  // postfix
  bool constant_ = true;
};

}  // namespace gml
