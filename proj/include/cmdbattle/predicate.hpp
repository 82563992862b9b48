#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cmdbattle/sensors.hpp"
#include "cmdbattle/text.hpp"

namespace cmdbattle {

inline constexpr int kMaxPredicateDepth = 6;

enum class CompareOp { lt, le, gt, ge, eq, ne };

constexpr std::string_view op_text(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
    case CompareOp::eq: return "==";
    case CompareOp::ne: return "!=";
  }
  return "?";
}

using Operand = std::variant<SensorVariable, double>;

// Boolean expression over sensor comparisons. `all_of`/`any_of` are n-ary
// (two or more children) so that `a and b and c` has a single shape.
struct Predicate {
  enum class Kind { compare, flag, negate, all_of, any_of };

  Kind kind = Kind::flag;
  CompareOp op = CompareOp::eq;
  Operand lhs = 0.0;
  Operand rhs = 0.0;
  SensorVariable flag = SensorVariable::opponent_is_attacking;
  std::vector<Predicate> children;

  static Predicate compare(Operand lhs, CompareOp op, Operand rhs) {
    Predicate p;
    p.kind = Kind::compare;
    p.lhs = lhs;
    p.op = op;
    p.rhs = rhs;
    return p;
  }
  static Predicate flag_of(SensorVariable v) {
    Predicate p;
    p.kind = Kind::flag;
    p.flag = v;
    return p;
  }
  static Predicate negate(Predicate inner) {
    Predicate p;
    p.kind = Kind::negate;
    p.children.push_back(std::move(inner));
    return p;
  }
  static Predicate all_of(std::vector<Predicate> parts) {
    Predicate p;
    p.kind = Kind::all_of;
    p.children = std::move(parts);
    return p;
  }
  static Predicate any_of(std::vector<Predicate> parts) {
    Predicate p;
    p.kind = Kind::any_of;
    p.children = std::move(parts);
    return p;
  }

  bool operator==(const Predicate& other) const {
    if (kind != other.kind) return false;
    switch (kind) {
      case Kind::compare: return op == other.op && lhs == other.lhs && rhs == other.rhs;
      case Kind::flag: return flag == other.flag;
      default: return children == other.children;
    }
  }
};

class PredicateError : public std::runtime_error {
 public:
  PredicateError(std::size_t column, const std::string& what)
      : std::runtime_error(what), column_(column) {}
  // Byte offset inside the predicate text.
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

inline int predicate_depth(const Predicate& p) {
  if (p.kind == Predicate::Kind::compare || p.kind == Predicate::Kind::flag) return 1;
  int deepest = 0;
  for (const auto& c : p.children) deepest = std::max(deepest, predicate_depth(c));
  return 1 + deepest;
}

namespace detail {

class PredicateParser {
 public:
  explicit PredicateParser(std::string_view text) : text_(text) {}

  Predicate parse() {
    skip_ws();
    if (pos_ == text_.size()) fail("empty predicate");
    Predicate p = parse_or();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(peek_word()) + "'");
    return p;
  }

 private:
  Predicate parse_or() {
    std::vector<Predicate> parts;
    parts.push_back(parse_and());
    while (accept_keyword("or")) parts.push_back(parse_and());
    if (parts.size() == 1) return std::move(parts.front());
    return Predicate::any_of(std::move(parts));
  }

  Predicate parse_and() {
    std::vector<Predicate> parts;
    parts.push_back(parse_cmp());
    while (accept_keyword("and")) parts.push_back(parse_cmp());
    if (parts.size() == 1) return std::move(parts.front());
    return Predicate::all_of(std::move(parts));
  }

  Predicate parse_cmp() {
    skip_ws();
    // Bounds recursion on hostile input; depth itself is checked by validation.
    if (++nesting_ > 4 * kMaxPredicateDepth) fail("predicate nested too deeply");
    struct Unnest {
      int& n;
      ~Unnest() { --n; }
    } unnest{nesting_};
    if (accept_keyword("not")) return Predicate::negate(parse_cmp());
    if (pos_ < text_.size() && text_[pos_] == '(') {
      ++pos_;
      Predicate inner = parse_or();
      skip_ws();
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("expected ')'");
      ++pos_;
      return inner;
    }
    Operand lhs = parse_operand();
    skip_ws();
    auto op = accept_op();
    if (!op) {
      if (auto* v = std::get_if<SensorVariable>(&lhs); v && is_boolean_sensor(*v)) {
        return Predicate::flag_of(*v);
      }
      if (pos_ == text_.size()) fail("expected comparison operator, found end of predicate");
      fail("expected comparison operator, found '" + std::string(peek_word()) + "'");
    }
    Operand rhs = parse_operand();
    return Predicate::compare(lhs, *op, rhs);
  }

  Operand parse_operand() {
    skip_ws();
    if (pos_ >= text_.size()) fail("expected sensor or number, found end of predicate");
    char c = text_[pos_];
    if (is_ident_start(c)) {
      std::size_t start = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      std::string_view word = text_.substr(start, pos_ - start);
      if (word == "and" || word == "or" || word == "not") {
        pos_ = start;
        fail("expected sensor or number, found '" + std::string(word) + "'");
      }
      auto v = sensor_from_name(word);
      if (!v) {
        pos_ = start;
        fail("unknown sensor '" + std::string(word) + "'");
      }
      return *v;
    }
    if (c == '+' || c == '-' || (c >= '0' && c <= '9')) {
      std::size_t start = pos_;
      ++pos_;
      while (pos_ < text_.size() && ((text_[pos_] >= '0' && text_[pos_] <= '9') || text_[pos_] == '.')) {
        ++pos_;
      }
      auto value = parse_decimal(text_.substr(start, pos_ - start));
      if (!value) {
        pos_ = start;
        fail("malformed number");
      }
      return *value;
    }
    fail("expected sensor or number, found '" + std::string(peek_word()) + "'");
  }

  std::optional<CompareOp> accept_op() {
    auto rest = text_.substr(pos_);
    auto take = [&](std::string_view tok, CompareOp op) -> std::optional<CompareOp> {
      if (rest.substr(0, tok.size()) == tok) {
        pos_ += tok.size();
        return op;
      }
      return std::nullopt;
    };
    if (auto op = take("<=", CompareOp::le)) return op;
    if (auto op = take(">=", CompareOp::ge)) return op;
    if (auto op = take("==", CompareOp::eq)) return op;
    if (auto op = take("!=", CompareOp::ne)) return op;
    if (auto op = take("<", CompareOp::lt)) return op;
    if (auto op = take(">", CompareOp::gt)) return op;
    return std::nullopt;
  }

  bool accept_keyword(std::string_view kw) {
    skip_ws();
    if (text_.substr(pos_, kw.size()) != kw) return false;
    std::size_t end = pos_ + kw.size();
    if (end < text_.size() && is_ident_char(text_[end])) return false;
    pos_ = end;
    return true;
  }

  std::string_view peek_word() const {
    std::size_t end = pos_;
    while (end < text_.size() && text_[end] != ' ' && end - pos_ < 24) ++end;
    if (end == pos_ && pos_ < text_.size()) ++end;
    return text_.substr(pos_, end - pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

  [[noreturn]] void fail(const std::string& what) const { throw PredicateError(pos_, what); }

  std::string_view text_;
  std::size_t pos_ = 0;
  int nesting_ = 0;
};

inline void append_operand(std::string& out, const Operand& o) {
  if (const auto* v = std::get_if<SensorVariable>(&o)) {
    out += sensor_name(*v);
  } else {
    out += format_decimal(std::get<double>(o));
  }
}

inline void append_predicate(std::string& out, const Predicate& p) {
  using K = Predicate::Kind;
  auto child = [&out](const Predicate& c, bool parens) {
    if (parens) out += '(';
    append_predicate(out, c);
    if (parens) out += ')';
  };
  switch (p.kind) {
    case K::compare:
      append_operand(out, p.lhs);
      out += ' ';
      out += op_text(p.op);
      out += ' ';
      append_operand(out, p.rhs);
      return;
    case K::flag:
      out += sensor_name(p.flag);
      return;
    case K::negate: {
      out += "not ";
      const Predicate& c = p.children.front();
      child(c, c.kind == K::all_of || c.kind == K::any_of);
      return;
    }
    case K::all_of:
    case K::any_of: {
      bool first = true;
      for (const auto& c : p.children) {
        if (!first) out += p.kind == K::all_of ? " and " : " or ";
        first = false;
        // Nested groups keep their parentheses so the shape survives a reparse.
        bool parens = c.kind == K::any_of || c.kind == K::all_of;
        child(c, parens);
      }
      return;
    }
  }
}

}  // namespace detail

// Throws PredicateError on malformed text or unknown sensors.
inline Predicate parse_predicate(std::string_view text) {
  return detail::PredicateParser(text).parse();
}

// Canonical text: lowercase keywords, single spaces, parentheses only where
// a nested and/or group needs them.
inline std::string print_predicate(const Predicate& p) {
  std::string out;
  detail::append_predicate(out, p);
  return out;
}

inline double operand_value(const Operand& o, const SensorSnapshot& s) {
  if (const auto* v = std::get_if<SensorVariable>(&o)) return s.value(*v);
  return std::get<double>(o);
}

inline bool eval_predicate(const Predicate& p, const SensorSnapshot& s) {
  using K = Predicate::Kind;
  switch (p.kind) {
    case K::compare: {
      double a = operand_value(p.lhs, s);
      double b = operand_value(p.rhs, s);
      switch (p.op) {
        case CompareOp::lt: return a < b;
        case CompareOp::le: return a <= b;
        case CompareOp::gt: return a > b;
        case CompareOp::ge: return a >= b;
        case CompareOp::eq: return a == b;
        case CompareOp::ne: return a != b;
      }
      return false;
    }
    case K::flag: return s.value(p.flag) != 0.0;
    case K::negate: return !eval_predicate(p.children.front(), s);
    case K::all_of:
      for (const auto& c : p.children) {
        if (!eval_predicate(c, s)) return false;
      }
      return true;
    case K::any_of:
      for (const auto& c : p.children) {
        if (eval_predicate(c, s)) return true;
      }
      return false;
  }
  return false;
}

}  // namespace cmdbattle
