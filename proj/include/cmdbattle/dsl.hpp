#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmdbattle/branch.hpp"

namespace cmdbattle {

// Hard ceiling on buffered program text; anything longer cannot fit in the
// node caps with sane predicates.
inline constexpr std::size_t kMaxProgramBytes = 16 * 1024;

class ParseError : public std::runtime_error {
 public:
  enum class Kind {
    syntax,     // token stream cannot extend to a program
    invalid,    // well-formed but breaks a branch invariant
    truncated,  // input ended before the program closed
  };

  ParseError(Kind kind, int line, int column, const std::string& message,
             std::vector<std::string> expected = {})
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                           message),
        kind_(kind),
        line_(line),
        column_(column),
        message_(message),
        expected_(std::move(expected)) {}

  Kind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& message() const { return message_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  Kind kind_;
  int line_;
  int column_;
  std::string message_;
  std::vector<std::string> expected_;
};

namespace dsl_detail {

enum class TokenKind { ident, string, number, lparen, rparen, lbrack, rbrack, comma, error };

struct Token {
  TokenKind kind = TokenKind::error;
  std::string text;  // identifier, decoded string body, number text, or error message
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last byte
  int line = 1;
  int column = 1;
};

inline std::string describe(const Token& t) {
  switch (t.kind) {
    case TokenKind::ident: return "'" + t.text + "'";
    case TokenKind::string: return "string \"" + t.text + "\"";
    case TokenKind::number: return "number " + t.text;
    case TokenKind::lparen: return "'('";
    case TokenKind::rparen: return "')'";
    case TokenKind::lbrack: return "'['";
    case TokenKind::rbrack: return "']'";
    case TokenKind::comma: return "','";
    case TokenKind::error: return "invalid input";
  }
  return "?";
}

inline constexpr std::string_view kKeywords[] = {"branch", "action", "condition", "control"};

// Byte-level lexer over a growing buffer. next() returns nullopt when the
// token at the cursor might still be extended by bytes not yet received.
class Lexer {
 public:
  void append(std::string_view bytes) { buffer_.append(bytes); }
  void close() { closed_ = true; }
  bool closed() const { return closed_; }
  std::size_t size() const { return buffer_.size(); }
  int line() const { return line_; }
  int column() const { return column_; }

  std::optional<Token> next() {
    if (!skip_trivia()) return std::nullopt;
    if (pos_ >= buffer_.size()) return std::nullopt;

    Token t;
    t.begin = pos_;
    t.line = line_;
    t.column = column_;
    char c = buffer_[pos_];
    auto single = [&](TokenKind k) {
      t.kind = k;
      t.text = std::string(1, c);
      advance(1);
      t.end = pos_;
      return t;
    };
    switch (c) {
      case '(': return single(TokenKind::lparen);
      case ')': return single(TokenKind::rparen);
      case '[': return single(TokenKind::lbrack);
      case ']': return single(TokenKind::rbrack);
      case ',': return single(TokenKind::comma);
      default: break;
    }
    if (c == '"') return lex_string(t);
    if (c == '+' || c == '-' || is_digit(c)) return lex_number(t);
    if (is_ident_start(c)) return lex_ident(t);
    t.kind = TokenKind::error;
    t.text = "unexpected character";
    t.end = pos_ + 1;
    return t;
  }

 private:
  // Returns false if a comment runs to the end of an open buffer.
  bool skip_trivia() {
    while (pos_ < buffer_.size()) {
      char c = buffer_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance(1);
      } else if (c == '#') {
        std::size_t eol = buffer_.find('\n', pos_);
        if (eol == std::string::npos) {
          if (!closed_) return false;
          advance(buffer_.size() - pos_);
        } else {
          advance(eol - pos_);
        }
      } else {
        break;
      }
    }
    return true;
  }

  std::optional<Token> lex_string(Token& t) {
    std::string body;
    std::size_t i = pos_ + 1;
    while (i < buffer_.size()) {
      char c = buffer_[i];
      if (c == '"') {
        t.kind = TokenKind::string;
        t.text = std::move(body);
        advance(i + 1 - pos_);
        t.end = pos_;
        return t;
      }
      if (c == '\n') return error_at(t, i, "unterminated string");
      if (c == '\\') {
        if (i + 1 >= buffer_.size()) break;
        char e = buffer_[i + 1];
        if (e != '"' && e != '\\') return error_at(t, i, "unsupported escape sequence");
        body += e;
        i += 2;
        continue;
      }
      body += c;
      ++i;
    }
    if (!closed_) return std::nullopt;
    return error_at(t, buffer_.size(), "unterminated string");
  }

  std::optional<Token> lex_number(Token& t) {
    std::size_t i = pos_ + 1;
    while (i < buffer_.size() && (is_digit(buffer_[i]) || buffer_[i] == '.')) ++i;
    if (i >= buffer_.size() && !closed_) return std::nullopt;
    if (i < buffer_.size() && is_ident_char(buffer_[i])) {
      return error_at(t, i, "malformed number");
    }
    std::string_view text(buffer_.data() + pos_, i - pos_);
    if (!parse_decimal(text)) return error_at(t, i, "malformed number '" + std::string(text) + "'");
    t.kind = TokenKind::number;
    t.text = std::string(text);
    advance(i - pos_);
    t.end = pos_;
    return t;
  }

  std::optional<Token> lex_ident(Token& t) {
    std::size_t i = pos_ + 1;
    while (i < buffer_.size() && is_ident_char(buffer_[i])) ++i;
    std::string_view text(buffer_.data() + pos_, i - pos_);
    if (i >= buffer_.size() && !closed_) {
      // A partial word that cannot grow into a keyword is already an error
      // for the parser, so hand it over without waiting.
      bool could_grow = false;
      for (auto kw : kKeywords) {
        if (kw.substr(0, text.size()) == text) could_grow = true;
      }
      if (could_grow) return std::nullopt;
    }
    t.kind = TokenKind::ident;
    t.text = std::string(text);
    advance(i - pos_);
    t.end = pos_;
    return t;
  }

  Token& error_at(Token& t, std::size_t end, std::string message) {
    t.kind = TokenKind::error;
    t.text = std::move(message);
    t.end = end;
    return t;
  }

  void advance(std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (buffer_[pos_] == '\n') {
        ++line_;
        column_ = 1;
      } else if ((static_cast<unsigned char>(buffer_[pos_]) & 0xC0) != 0x80) {
        ++column_;
      }
      ++pos_;
    }
  }

  static bool is_digit(char c) { return c >= '0' && c <= '9'; }
  static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

  std::string buffer_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
  bool closed_ = false;
};

struct NeedMore {};

// Recursive-descent parser over tokens pulled lazily from the lexer. It is
// rerun from the first token on every feed; tokens are cached so lexing
// stays incremental.
class Parser {
 public:
  Parser(Lexer& lexer, std::deque<Token>& tokens) : lexer_(lexer), tokens_(tokens) {}

  BehaviorBranch parse_program(std::size_t& consumed) {
    expect_keyword("branch");
    expect(TokenKind::lparen, {"'('"});
    BehaviorBranch b{parse_list(1)};
    const Token& close = expect(TokenKind::rparen, {"')'"});
    consumed = close.end;
    auto report = validate(b);
    if (!report.ok()) {
      throw ParseError(ParseError::Kind::invalid, close.line, close.column,
                       report.violations.front().path + ": " + report.violations.front().rule);
    }
    return b;
  }

 private:
  std::vector<Node> parse_list(int depth) {
    expect(TokenKind::lbrack, {"'['"});
    std::vector<Node> nodes;
    if (accept(TokenKind::rbrack)) return nodes;
    while (true) {
      nodes.push_back(parse_node(depth));
      const Token& sep = expect_one_of({TokenKind::comma, TokenKind::rbrack}, {"','", "']'"});
      if (sep.kind == TokenKind::rbrack) return nodes;
      if (accept(TokenKind::rbrack)) return nodes;
    }
  }

  Node parse_node(int depth) {
    const Token& head = peek();
    if (head.kind != TokenKind::ident ||
        (head.text != "action" && head.text != "condition" && head.text != "control")) {
      syntax_error(head, {"'action'", "'condition'", "'control'"});
    }
    if (depth > kMaxBranchDepth) {
      invalid(head, "depth " + std::to_string(depth) + " > " + std::to_string(kMaxBranchDepth));
    }
    if (++node_count_ > kMaxBranchNodes) {
      invalid(head, "node count " + std::to_string(node_count_) + " > " + std::to_string(kMaxBranchNodes));
    }
    std::string word = head.text;
    ++index_;
    expect(TokenKind::lparen, {"'('"});
    const Token& name_tok = expect(TokenKind::string, {"string"});

    if (word == "action") {
      auto name = action_from_name(name_tok.text);
      if (!name) invalid(name_tok, "unknown action '" + name_tok.text + "'");
      ActionNode a{*name, {}};
      while (true) {
        const Token& t = expect_one_of({TokenKind::comma, TokenKind::rparen}, {"','", "')'"});
        if (t.kind == TokenKind::rparen) {
          if (auto e = check_action(a)) invalid(t, *e);
          return Node{std::move(a)};
        }
        const Token& num = expect(TokenKind::number, {"number"});
        a.args.push_back(*parse_decimal(num.text));
        if (a.args.size() > action_arity(a.name)) {
          invalid(num, std::string(action_name(a.name)) + " arity " + std::to_string(action_arity(a.name)) +
                           ", got " + std::to_string(a.args.size()) + " or more");
        }
      }
    }
    if (word == "control") {
      auto name = control_from_name(name_tok.text);
      if (!name) invalid(name_tok, "unknown control '" + name_tok.text + "'");
      expect(TokenKind::rparen, {"')'"});
      return control(*name);
    }
    Predicate pred;
    try {
      pred = parse_predicate(name_tok.text);
    } catch (const PredicateError& e) {
      // +1 for the opening quote.
      throw ParseError(ParseError::Kind::syntax, name_tok.line,
                       name_tok.column + 1 + static_cast<int>(e.column()),
                       std::string("in predicate: ") + e.what());
    }
    if (auto e = check_predicate(pred)) invalid(name_tok, *e);
    expect(TokenKind::comma, {"','"});
    auto then_nodes = parse_list(depth + 1);
    expect(TokenKind::comma, {"','"});
    auto else_nodes = parse_list(depth + 1);
    expect(TokenKind::rparen, {"')'"});
    return condition(std::move(pred), std::move(then_nodes), std::move(else_nodes));
  }

  const Token& peek() {
    if (index_ == tokens_.size()) {
      auto t = lexer_.next();
      if (!t) throw NeedMore{};
      tokens_.push_back(std::move(*t));
    }
    const Token& t = tokens_[index_];
    if (t.kind == TokenKind::error) {
      throw ParseError(ParseError::Kind::syntax, t.line, t.column, t.text);
    }
    return t;
  }

  bool accept(TokenKind k) {
    if (peek().kind != k) return false;
    ++index_;
    return true;
  }

  const Token& expect(TokenKind k, std::vector<std::string> expected) {
    const Token& t = peek();
    if (t.kind != k) syntax_error(t, std::move(expected));
    ++index_;
    return t;
  }

  const Token& expect_one_of(std::initializer_list<TokenKind> kinds, std::vector<std::string> expected) {
    const Token& t = peek();
    for (auto k : kinds) {
      if (t.kind == k) {
        ++index_;
        return t;
      }
    }
    syntax_error(t, std::move(expected));
  }

  void expect_keyword(std::string_view kw) {
    const Token& t = peek();
    if (t.kind != TokenKind::ident || t.text != kw) syntax_error(t, {"'" + std::string(kw) + "'"});
    ++index_;
  }

  [[noreturn]] static void syntax_error(const Token& found, std::vector<std::string> expected) {
    std::string msg = "expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i > 0) msg += i + 1 == expected.size() ? " or " : ", ";
      msg += expected[i];
    }
    msg += " but found " + describe(found);
    throw ParseError(ParseError::Kind::syntax, found.line, found.column, msg, std::move(expected));
  }

  [[noreturn]] static void invalid(const Token& at, const std::string& rule) {
    throw ParseError(ParseError::Kind::invalid, at.line, at.column, rule);
  }

  Lexer& lexer_;
  std::deque<Token>& tokens_;
  std::size_t index_ = 0;
  std::size_t node_count_ = 0;
};

}  // namespace dsl_detail

enum class StreamState { incomplete, complete, failed };

// Incremental parser for one `branch(...)` program arriving in chunks.
// Completes as soon as the `)` closing `branch(` is seen and never reads
// past it; once complete or failed, further input is ignored.
class StreamParser {
 public:
  StreamState feed(std::string_view chunk) {
    if (state_ != StreamState::incomplete) return state_;
    lexer_.append(chunk);
    step();
    if (state_ == StreamState::incomplete && lexer_.size() > kMaxProgramBytes) {
      fail(ParseError(ParseError::Kind::syntax, lexer_.line(), lexer_.column(),
                      "program exceeds " + std::to_string(kMaxProgramBytes) + " bytes"));
    }
    return state_;
  }

  // Signals that no more input will arrive.
  StreamState finish() {
    if (state_ != StreamState::incomplete) return state_;
    lexer_.close();
    step();
    if (state_ == StreamState::incomplete) {
      fail(ParseError(ParseError::Kind::truncated, lexer_.line(), lexer_.column(), "unexpected end of input"));
    }
    return state_;
  }

  StreamState state() const { return state_; }
  const BehaviorBranch& branch() const { return *branch_; }
  // One past the `)` that closed the program; 0 until complete.
  std::size_t consumed_bytes() const { return consumed_; }
  const ParseError& error() const { return *error_; }

 private:
  void step() {
    dsl_detail::Parser parser(lexer_, tokens_);
    try {
      std::size_t consumed = 0;
      BehaviorBranch b = parser.parse_program(consumed);
      branch_ = std::move(b);
      consumed_ = consumed;
      state_ = StreamState::complete;
      tokens_.clear();
    } catch (const dsl_detail::NeedMore&) {
    } catch (const ParseError& e) {
      fail(e);
    }
  }

  void fail(ParseError e) {
    error_ = std::move(e);
    state_ = StreamState::failed;
    tokens_.clear();
  }

  dsl_detail::Lexer lexer_;
  std::deque<dsl_detail::Token> tokens_;
  StreamState state_ = StreamState::incomplete;
  std::optional<BehaviorBranch> branch_;
  std::optional<ParseError> error_;
  std::size_t consumed_ = 0;
};

// Parses one program; trailing text after the closing `)` is ignored.
// Throws ParseError.
inline BehaviorBranch parse(std::string_view text) {
  StreamParser p;
  p.feed(text);
  p.finish();
  if (p.state() == StreamState::failed) throw p.error();
  return p.branch();
}

namespace dsl_detail {

inline void print_nodes(std::string& out, const std::vector<Node>& nodes);

inline void print_node(std::string& out, const Node& node) {
  if (const auto* a = std::get_if<ActionNode>(&node.value)) {
    out += "action(\"";
    out += action_name(a->name);
    out += '"';
    for (double v : a->args) {
      out += ", ";
      out += format_decimal(v);
    }
    out += ')';
  } else if (const auto* c = std::get_if<ConditionNode>(&node.value)) {
    out += "condition(\"";
    out += print_predicate(c->predicate);
    out += "\", ";
    print_nodes(out, c->then_nodes);
    out += ", ";
    print_nodes(out, c->else_nodes);
    out += ')';
  } else {
    out += "control(\"";
    out += control_name(std::get<ControlNode>(node.value).name);
    out += "\")";
  }
}

inline void print_nodes(std::string& out, const std::vector<Node>& nodes) {
  out += '[';
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (i > 0) out += ", ";
    print_node(out, nodes[i]);
  }
  out += ']';
}

}  // namespace dsl_detail

// Single-line canonical DSL text; parse(print_canonical(b)) == b.
inline std::string print_canonical(const BehaviorBranch& b) {
  std::string out = "branch(";
  dsl_detail::print_nodes(out, b.nodes);
  out += ')';
  return out;
}

}  // namespace cmdbattle
