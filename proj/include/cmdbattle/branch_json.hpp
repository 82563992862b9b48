#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cmdbattle/branch.hpp"

namespace cmdbattle {

// Raised by decode_json; the message starts with the schema path.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace detail {

inline nlohmann::ordered_json encode_nodes(const std::vector<Node>& nodes);

inline nlohmann::ordered_json encode_node(const Node& node) {
  nlohmann::ordered_json j;
  if (const auto* a = std::get_if<ActionNode>(&node.value)) {
    j["kind"] = "action";
    j["name"] = action_name(a->name);
    j["args"] = nlohmann::ordered_json::array();
    for (double v : a->args) j["args"].push_back(v);
  } else if (const auto* c = std::get_if<ConditionNode>(&node.value)) {
    j["kind"] = "condition";
    j["pred"] = print_predicate(c->predicate);
    j["then"] = encode_nodes(c->then_nodes);
    j["else"] = encode_nodes(c->else_nodes);
  } else {
    j["kind"] = "control";
    j["name"] = control_name(std::get<ControlNode>(node.value).name);
  }
  return j;
}

inline nlohmann::ordered_json encode_nodes(const std::vector<Node>& nodes) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& n : nodes) arr.push_back(encode_node(n));
  return arr;
}

template <typename Json>
const Json& require_field(const Json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DecodeError(path, std::string("missing field '") + key + "'");
  return *it;
}

template <typename Json>
std::string require_string(const Json& obj, const std::string& path, const char* key) {
  const auto& v = require_field(obj, path, key);
  if (!v.is_string()) throw DecodeError(path + "." + key, "expected string");
  return v.template get<std::string>();
}

template <typename Json>
std::vector<Node> decode_nodes(const Json& arr, const std::string& path);

template <typename Json>
Node decode_node(const Json& j, const std::string& path) {
  if (!j.is_object()) throw DecodeError(path, "expected object");
  std::string kind = require_string(j, path, "kind");
  if (kind == "action") {
    std::string name = require_string(j, path, "name");
    auto parsed = action_from_name(name);
    if (!parsed) throw DecodeError(path + ".name", "unknown action '" + name + "'");
    const auto& args = require_field(j, path, "args");
    if (!args.is_array()) throw DecodeError(path + ".args", "expected array");
    ActionNode a{*parsed, {}};
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (!args[i].is_number()) {
        throw DecodeError(path + ".args[" + std::to_string(i) + "]", "expected number");
      }
      a.args.push_back(args[i].template get<double>());
    }
    if (auto e = check_action(a)) throw DecodeError(path + ".args", *e);
    return Node{std::move(a)};
  }
  if (kind == "condition") {
    std::string text = require_string(j, path, "pred");
    Predicate pred;
    try {
      pred = parse_predicate(text);
    } catch (const PredicateError& e) {
      throw DecodeError(path + ".pred", std::string(e.what()) + " at column " + std::to_string(e.column() + 1));
    }
    auto then_nodes = decode_nodes(require_field(j, path, "then"), path + ".then");
    auto else_nodes = decode_nodes(require_field(j, path, "else"), path + ".else");
    return condition(std::move(pred), std::move(then_nodes), std::move(else_nodes));
  }
  if (kind == "control") {
    std::string name = require_string(j, path, "name");
    auto parsed = control_from_name(name);
    if (!parsed) throw DecodeError(path + ".name", "unknown control '" + name + "'");
    return control(*parsed);
  }
  throw DecodeError(path + ".kind", "unknown kind '" + kind + "'");
}

template <typename Json>
std::vector<Node> decode_nodes(const Json& arr, const std::string& path) {
  if (!arr.is_array()) throw DecodeError(path, "expected array");
  std::vector<Node> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(decode_node(arr[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace detail

// Field order is fixed (kind, name/pred, args/then/else) so output is stable.
inline nlohmann::ordered_json branch_to_json(const BehaviorBranch& b) {
  nlohmann::ordered_json j;
  j["nodes"] = detail::encode_nodes(b.nodes);
  return j;
}

inline std::string encode_json(const BehaviorBranch& b) { return branch_to_json(b).dump(); }

// Decodes an already-parsed JSON value; the result is validated.
template <typename Json>
BehaviorBranch branch_from_json(const Json& j) {
  if (!j.is_object()) throw DecodeError("$", "expected object");
  BehaviorBranch b{detail::decode_nodes(detail::require_field(j, "$", "nodes"), "nodes")};
  auto report = validate(b);
  if (!report.ok()) throw DecodeError(report.violations.front().path, report.violations.front().rule);
  return b;
}

inline BehaviorBranch decode_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DecodeError("$", std::string("invalid JSON: ") + e.what());
  }
  return branch_from_json(j);
}

}  // namespace cmdbattle
