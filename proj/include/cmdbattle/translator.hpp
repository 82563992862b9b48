#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmdbattle/branch.hpp"
#include "cmdbattle/dsl.hpp"
#include "cmdbattle/text.hpp"

namespace cmdbattle {

inline constexpr std::size_t kMaxCommandChars = 500;

enum class TranslateErrorCode { bad_command, network_error, timeout, parse_failed, invalid_branch, cancelled };

constexpr const char* error_code_name(TranslateErrorCode c) {
  switch (c) {
    case TranslateErrorCode::bad_command: return "bad_command";
    case TranslateErrorCode::network_error: return "network_error";
    case TranslateErrorCode::timeout: return "timeout";
    case TranslateErrorCode::parse_failed: return "parse_failed";
    case TranslateErrorCode::invalid_branch: return "invalid_branch";
    case TranslateErrorCode::cancelled: return "cancelled";
  }
  return "network_error";
}

class TranslateError : public std::runtime_error {
 public:
  TranslateError(TranslateErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  TranslateErrorCode code() const { return code_; }

 private:
  TranslateErrorCode code_;
};

struct Exemplar {
  std::string command;
  std::string code;
};

struct PromptTemplate {
  std::string preamble;
  std::vector<Exemplar> exemplars;

  static PromptTemplate defaults();

  // Every exemplar must be in canonical form already; throws otherwise.
  void self_check() const {
    if (exemplars.size() < 3) throw std::invalid_argument("prompt template needs at least 3 exemplars");
    for (const auto& e : exemplars) {
      std::string again;
      try {
        again = print_canonical(parse(e.code));
      } catch (const ParseError& err) {
        throw std::invalid_argument("exemplar '" + e.command + "' does not parse: " + err.what());
      }
      if (again != e.code) {
        throw std::invalid_argument("exemplar '" + e.command + "' is not canonical; expected " + again);
      }
    }
  }
};

inline PromptTemplate PromptTemplate::defaults() {
  PromptTemplate t;
  t.preamble =
      "Translate a player's command for a battle game agent into a behavior branch.\n"
      "A program is branch([...]) holding a list of nodes, run top to bottom:\n"
      "  action(\"name\", args...)  one of thunderbolt, iron_tail, tackle, approach, retreat,\n"
      "                           move_to(x, z), idle(seconds)\n"
      "  condition(\"predicate\", [then nodes], [else nodes])\n"
      "  control(\"repeat\") restarts from the first node; control(\"end\") stops.\n"
      "Predicates compare numbers with < <= > >= == != and combine with and, or, not.\n"
      "Sensors: distance_to_opponent, self_hp, opponent_hp, self_x, self_z, opponent_x,\n"
      "opponent_z, elapsed_time, opponent_is_attacking.\n"
      "Answer with the code only, on one line.\n";
  t.exemplars = {
      {"shoot thunderbolts at them", R"(branch([action("thunderbolt"), control("repeat")]))"},
      {"go hit them with your tail", R"(branch([action("approach"), action("iron_tail")]))"},
      {"charge in and tackle", R"(branch([action("approach"), action("tackle")]))"},
      {"keep your distance and zap",
       R"(branch([condition("distance_to_opponent < 6", [action("retreat")], [action("thunderbolt")]), control("repeat")]))"},
      {"get close and tail them, back off when you are hurt",
       R"(branch([condition("self_hp < 30", [action("retreat")], [condition("distance_to_opponent > 2", [action("approach")], [action("iron_tail")])]), control("repeat")]))"},
  };
  return t;
}

// Exemplar file: [{"command": "...", "code": "..."}, ...]. The preamble stays
// the built-in one.
inline PromptTemplate load_exemplars(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open exemplar file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  PromptTemplate t = PromptTemplate::defaults();
  t.exemplars.clear();
  try {
    auto j = nlohmann::json::parse(ss.str());
    if (!j.is_array()) throw std::invalid_argument("expected a JSON array");
    for (const auto& e : j) {
      t.exemplars.push_back({e.at("command").get<std::string>(), e.at("code").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  t.self_check();
  return t;
}

// Trims and checks a player command; throws bad_command.
inline std::string checked_command(std::string_view text) {
  std::string_view t = trim(text);
  if (t.empty()) throw TranslateError(TranslateErrorCode::bad_command, "command is empty");
  std::size_t n = utf8_length(t);
  if (n > kMaxCommandChars) {
    throw TranslateError(TranslateErrorCode::bad_command,
                         "command is " + std::to_string(n) + " characters, limit is " + std::to_string(kMaxCommandChars));
  }
  return std::string(t);
}

inline std::string build_prompt(const PromptTemplate& t, std::string_view command) {
  std::string cmd = checked_command(command);
  for (char& c : cmd) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::string out = t.preamble;
  out += '\n';
  for (const auto& e : t.exemplars) {
    out += "Command: " + e.command + "\nCode: " + e.code + "\n\n";
  }
  out += "Command: " + cmd + "\nCode:";
  return out;
}

using Clock = std::chrono::steady_clock;

struct StreamRequest {
  std::string prompt;
  Clock::time_point deadline;
  std::stop_token stop;
  int max_tokens = 256;
};

// A streaming text completion source. stream() delivers chunks in order
// until the completion ends or on_chunk returns false, at which point the
// implementation must stop reading and drop the connection. Failures are
// reported as TranslateError (network_error, timeout or cancelled).
class CompletionEndpoint {
 public:
  virtual ~CompletionEndpoint() = default;
  virtual void stream(const StreamRequest& req, const std::function<bool(std::string_view)>& on_chunk) = 0;
};

struct TranslateOptions {
  std::chrono::milliseconds timeout{30000};
  bool early_stop = true;
  std::stop_token stop;
  int max_tokens = 256;
};

struct TranslationResult {
  BehaviorBranch branch;
  std::string raw_prefix;  // program text exactly as streamed
  std::int64_t latency_ms = 0;
  std::size_t tokens_consumed = 0;
  std::size_t bytes_received = 0;
  bool early_stopped = false;
};

// Streams a completion into the parser and returns as soon as the program
// closes (unless early stop is disabled). Throws TranslateError.
inline TranslationResult translate(std::string_view command, CompletionEndpoint& endpoint,
                                   const PromptTemplate& tmpl, const TranslateOptions& opts = {}) {
  StreamRequest req;
  req.prompt = build_prompt(tmpl, command);
  auto start = Clock::now();
  req.deadline = start + opts.timeout;
  req.stop = opts.stop;
  req.max_tokens = opts.max_tokens;

  StreamParser parser;
  TranslationResult r;
  std::string received;
  Clock::time_point done_at{};
  bool timed_out = false;
  bool closed_in_stream = false;

  endpoint.stream(req, [&](std::string_view chunk) {
    if (opts.stop.stop_requested()) return false;
    if (Clock::now() >= req.deadline) {
      timed_out = true;
      return false;
    }
    received.append(chunk);
    ++r.tokens_consumed;
    if (parser.state() == StreamState::incomplete) {
      parser.feed(chunk);
      if (parser.state() != StreamState::incomplete) done_at = Clock::now();
      closed_in_stream = parser.state() == StreamState::complete;
    }
    if (parser.state() == StreamState::failed) return false;
    return !(opts.early_stop && parser.state() == StreamState::complete);
  });

  if (opts.stop.stop_requested()) throw TranslateError(TranslateErrorCode::cancelled, "translation cancelled");
  if (timed_out || (parser.state() == StreamState::incomplete && Clock::now() >= req.deadline)) {
    throw TranslateError(TranslateErrorCode::timeout, "model did not finish within the timeout");
  }
  if (parser.state() == StreamState::incomplete) {
    parser.finish();
    done_at = Clock::now();
  }
  if (parser.state() == StreamState::failed) {
    const ParseError& e = parser.error();
    auto code = e.kind() == ParseError::Kind::invalid ? TranslateErrorCode::invalid_branch
                                                      : TranslateErrorCode::parse_failed;
    throw TranslateError(code, std::string("model output rejected: ") + e.what());
  }

  BehaviorBranch b = parser.branch();
  // The parser validates already; check again rather than trust it.
  auto report = validate(b);
  if (!report.ok()) throw TranslateError(TranslateErrorCode::invalid_branch, report.summary());

  r.branch = std::move(b);
  r.raw_prefix = received.substr(0, parser.consumed_bytes());
  r.bytes_received = received.size();
  r.early_stopped = opts.early_stop && closed_in_stream;
  if (!opts.early_stop) done_at = Clock::now();
  r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(done_at - start).count();
  return r;
}

namespace translator_detail {

inline bool has_any(const std::string& s, std::initializer_list<std::string_view> words) {
  for (auto w : words) {
    if (s.find(w) != std::string::npos) return true;
  }
  return false;
}

}  // namespace translator_detail

// Offline stand-in for the model: keyword rules, first match wins.
//   away/distance/retreat + thunder/zap -> keep away and zap
//   close/approach + tail              -> close in, iron tail in range
//   close/approach + tackle/charge     -> close in, tackle in range
//   thunder/zap                        -> thunderbolt forever
//   tail                               -> iron tail forever
//   tackle/charge                      -> tackle forever
//   away/distance/retreat              -> keep away
//   close/approach                     -> close in, iron tail in range
//   anything else                      -> approach forever
inline std::string mock_translate_code(std::string_view command) {
  using translator_detail::has_any;
  std::string s = to_lower_ascii(command);
  bool away = has_any(s, {"away", "distance", "retreat"});
  bool zap = has_any(s, {"thunder", "zap"});
  bool close = has_any(s, {"close", "approach"});
  bool tail = has_any(s, {"tail"});
  bool tackle = has_any(s, {"tackle", "charge"});

  const char* melee_tail =
      R"(branch([condition("distance_to_opponent > 2", [action("approach")], [action("iron_tail")]), control("repeat")]))";
  if (away && zap) {
    return R"(branch([condition("distance_to_opponent < 6", [action("retreat")], [action("thunderbolt")]), control("repeat")]))";
  }
  if (close && tail) return melee_tail;
  if (close && tackle) {
    return R"(branch([condition("distance_to_opponent > 4", [action("approach")], [action("tackle")]), control("repeat")]))";
  }
  if (zap) return R"(branch([action("thunderbolt"), control("repeat")]))";
  if (tail) return R"(branch([action("iron_tail"), control("repeat")]))";
  if (tackle) return R"(branch([action("tackle"), control("repeat")]))";
  if (away) {
    return R"(branch([condition("distance_to_opponent < 8", [action("retreat")], [action("idle", 0.5)]), control("repeat")]))";
  }
  if (close) return melee_tail;
  return R"(branch([action("approach"), control("repeat")]))";
}

inline BehaviorBranch mock_translate(std::string_view command) { return parse(mock_translate_code(command)); }

// Serves mock_translate output as a completion stream, a few bytes at a
// time, followed by chatter that early stop should never read.
class MockEndpoint : public CompletionEndpoint {
 public:
  explicit MockEndpoint(std::size_t chunk_bytes = 8) : chunk_bytes_(chunk_bytes) {}

  void stream(const StreamRequest& req, const std::function<bool(std::string_view)>& on_chunk) override {
    // The command is the text after the last "Command: " line.
    auto at = req.prompt.rfind("Command: ");
    std::string command = req.prompt.substr(at + 9);
    command = command.substr(0, command.rfind("\nCode:"));
    std::string text = " " + mock_translate_code(command) + "\n\nCommand: and then";
    for (std::size_t i = 0; i < text.size(); i += chunk_bytes_) {
      if (req.stop.stop_requested()) throw TranslateError(TranslateErrorCode::cancelled, "cancelled");
      if (!on_chunk(std::string_view(text).substr(i, chunk_bytes_))) return;
    }
  }

 private:
  std::size_t chunk_bytes_;
};

}  // namespace cmdbattle
