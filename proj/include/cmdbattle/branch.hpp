#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cmdbattle/predicate.hpp"

namespace cmdbattle {

inline constexpr std::size_t kMaxBranchNodes = 64;
inline constexpr int kMaxBranchDepth = 8;

enum class ActionName { thunderbolt, iron_tail, tackle, approach, retreat, move_to, idle };
enum class ControlName { repeat, end };

inline constexpr std::array<std::string_view, 7> kActionNames = {
    "thunderbolt", "iron_tail", "tackle", "approach", "retreat", "move_to", "idle"};
inline constexpr std::array<std::string_view, 2> kControlNames = {"repeat", "end"};

constexpr std::string_view action_name(ActionName a) { return kActionNames[static_cast<std::size_t>(a)]; }
constexpr std::string_view control_name(ControlName c) { return kControlNames[static_cast<std::size_t>(c)]; }

constexpr std::optional<ActionName> action_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i) {
    if (kActionNames[i] == s) return static_cast<ActionName>(i);
  }
  return std::nullopt;
}

constexpr std::optional<ControlName> control_from_name(std::string_view s) {
  for (std::size_t i = 0; i < kControlNames.size(); ++i) {
    if (kControlNames[i] == s) return static_cast<ControlName>(i);
  }
  return std::nullopt;
}

// move_to takes (x, z) in meters, idle takes seconds, everything else nothing.
constexpr std::size_t action_arity(ActionName a) {
  switch (a) {
    case ActionName::move_to: return 2;
    case ActionName::idle: return 1;
    default: return 0;
  }
}

constexpr bool is_attack(ActionName a) {
  return a == ActionName::thunderbolt || a == ActionName::iron_tail || a == ActionName::tackle;
}

struct Node;

struct ActionNode {
  ActionName name = ActionName::idle;
  std::vector<double> args;
  bool operator==(const ActionNode&) const = default;
};

struct ConditionNode {
  Predicate predicate;
  std::vector<Node> then_nodes;
  std::vector<Node> else_nodes;
  bool operator==(const ConditionNode& other) const;
};

struct ControlNode {
  ControlName name = ControlName::end;
  bool operator==(const ControlNode&) const = default;
};

struct Node {
  std::variant<ActionNode, ConditionNode, ControlNode> value;
  bool operator==(const Node&) const = default;
};

inline bool ConditionNode::operator==(const ConditionNode& other) const {
  return predicate == other.predicate && then_nodes == other.then_nodes &&
         else_nodes == other.else_nodes;
}

// A translated player command: the root sequence of nodes.
struct BehaviorBranch {
  std::vector<Node> nodes;
  bool operator==(const BehaviorBranch&) const = default;
};

inline Node action(ActionName name, std::vector<double> args = {}) {
  return Node{ActionNode{name, std::move(args)}};
}
inline Node condition(Predicate pred, std::vector<Node> then_nodes, std::vector<Node> else_nodes) {
  return Node{ConditionNode{std::move(pred), std::move(then_nodes), std::move(else_nodes)}};
}
inline Node control(ControlName name) { return Node{ControlNode{name}}; }

inline std::size_t count_nodes(const std::vector<Node>& list) {
  std::size_t n = 0;
  for (const auto& node : list) {
    ++n;
    if (const auto* c = std::get_if<ConditionNode>(&node.value)) {
      n += count_nodes(c->then_nodes) + count_nodes(c->else_nodes);
    }
  }
  return n;
}

inline std::size_t count_nodes(const BehaviorBranch& b) { return count_nodes(b.nodes); }

// Depth of the deepest node; root-level nodes are at depth 1.
inline int branch_depth(const std::vector<Node>& list) {
  int deepest = 0;
  for (const auto& node : list) {
    int d = 1;
    if (const auto* c = std::get_if<ConditionNode>(&node.value)) {
      d += std::max(branch_depth(c->then_nodes), branch_depth(c->else_nodes));
    }
    deepest = std::max(deepest, d);
  }
  return deepest;
}

struct Violation {
  std::string path;  // e.g. "nodes[0].then[2]"
  std::string rule;
  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.path + ": " + v.rule;
    }
    return out;
  }
};

// Arity/argument rule for one action, shared with the parsers so that they
// can reject bad actions as soon as they close.
inline std::optional<std::string> check_action(const ActionNode& a) {
  std::size_t want = action_arity(a.name);
  if (a.args.size() != want) {
    return std::string(action_name(a.name)) + " arity " + std::to_string(want) + ", got " +
           std::to_string(a.args.size());
  }
  for (double v : a.args) {
    if (!std::isfinite(v)) return std::string("non-finite argument");
  }
  if (a.name == ActionName::idle && !(a.args[0] > 0.0)) {
    return std::string("idle duration must be > 0, got ") + format_decimal(a.args[0]);
  }
  return std::nullopt;
}

inline std::optional<std::string> check_predicate(const Predicate& p) {
  using K = Predicate::Kind;
  int depth = predicate_depth(p);
  if (depth > kMaxPredicateDepth) {
    return "predicate depth " + std::to_string(depth) + " > " + std::to_string(kMaxPredicateDepth);
  }
  struct Walk {
    static std::optional<std::string> run(const Predicate& q) {
      switch (q.kind) {
        case K::compare:
          for (const Operand* o : {&q.lhs, &q.rhs}) {
            if (const auto* d = std::get_if<double>(o); d && !std::isfinite(*d)) {
              return std::string("non-finite literal in predicate");
            }
          }
          return std::nullopt;
        case K::flag:
          if (!is_boolean_sensor(q.flag)) {
            return "sensor '" + std::string(sensor_name(q.flag)) + "' is not boolean";
          }
          return std::nullopt;
        case K::negate:
          if (q.children.size() != 1) return std::string("'not' takes exactly one operand");
          break;
        case K::all_of:
        case K::any_of:
          if (q.children.size() < 2) return std::string("'and'/'or' need at least two operands");
          break;
      }
      for (const auto& c : q.children) {
        if (auto e = run(c)) return e;
      }
      return std::nullopt;
    }
  };
  return Walk::run(p);
}

namespace detail {

inline void validate_list(const std::vector<Node>& list, const std::string& prefix, std::string_view field,
                          ValidationReport& report) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::string path = prefix + std::string(field) + "[" + std::to_string(i) + "]";
    const Node& node = list[i];
    if (const auto* a = std::get_if<ActionNode>(&node.value)) {
      if (auto e = check_action(*a)) report.violations.push_back({path, *e});
    } else if (const auto* c = std::get_if<ConditionNode>(&node.value)) {
      if (auto e = check_predicate(c->predicate)) report.violations.push_back({path + ".pred", *e});
      validate_list(c->then_nodes, path + ".", "then", report);
      validate_list(c->else_nodes, path + ".", "else", report);
    }
  }
}

// Path of the first node sitting at `target` depth.
inline std::optional<std::string> find_depth_path(const std::vector<Node>& list, const std::string& prefix,
                                                  std::string_view field, int depth, int target) {
  for (std::size_t i = 0; i < list.size(); ++i) {
    std::string path = prefix + std::string(field) + "[" + std::to_string(i) + "]";
    if (depth == target) return path;
    if (const auto* c = std::get_if<ConditionNode>(&list[i].value)) {
      if (auto p = find_depth_path(c->then_nodes, path + ".", "then", depth + 1, target)) return p;
      if (auto p = find_depth_path(c->else_nodes, path + ".", "else", depth + 1, target)) return p;
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Checks every structural invariant; never throws.
inline ValidationReport validate(const BehaviorBranch& branch) {
  ValidationReport report;
  if (branch.nodes.empty()) {
    report.violations.push_back({"nodes", "branch has no nodes"});
    return report;
  }
  std::size_t count = count_nodes(branch);
  if (count > kMaxBranchNodes) {
    report.violations.push_back(
        {"nodes", "node count " + std::to_string(count) + " > " + std::to_string(kMaxBranchNodes)});
  }
  int depth = branch_depth(branch.nodes);
  if (depth > kMaxBranchDepth) {
    auto path = detail::find_depth_path(branch.nodes, "", "nodes", 1, depth);
    report.violations.push_back({path.value_or("nodes"), "depth " + std::to_string(depth) + " > " +
                                                             std::to_string(kMaxBranchDepth)});
  }
  detail::validate_list(branch.nodes, "", "nodes", report);
  return report;
}

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(ValidationReport report)
      : std::runtime_error(report.summary()), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

}  // namespace cmdbattle
