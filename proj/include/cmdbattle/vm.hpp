#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "cmdbattle/battle_config.hpp"
#include "cmdbattle/branch.hpp"
#include "cmdbattle/intent.hpp"
#include "cmdbattle/predicate.hpp"
#include "cmdbattle/sensors.hpp"

namespace cmdbattle {

// Per-action durations in ticks and movement goals, derived from the battle
// constants so that the VM and the engine agree on attack lengths.
struct VmTiming {
  double tick_dt = 0.05;
  // Attack actions also cover the tick on which the engine resolves them.
  int thunderbolt_ticks = 5;
  int iron_tail_ticks = 9;
  int tackle_ticks = 10;
  double approach_stop_distance = 1.5;
  int approach_max_ticks = 20;
  int retreat_ticks = 20;
  int move_to_max_ticks = 200;
  double arrive_distance = 0.2;

  static VmTiming from(const BattleConfig& c) {
    VmTiming t;
    t.tick_dt = c.tick_dt;
    t.thunderbolt_ticks = c.cast_ticks() + 1;
    t.iron_tail_ticks = c.windup_ticks() + 1;
    t.tackle_ticks = c.ticks(c.tackle_distance / c.tackle_speed);
    t.approach_stop_distance = c.iron_tail_range - c.agent_radius;
    t.approach_max_ticks = c.ticks(1.0);
    t.retreat_ticks = c.ticks(1.0);
    t.move_to_max_ticks = c.ticks(10.0);
    t.arrive_distance = c.move_speed * c.tick_dt;
    return t;
  }

  int idle_ticks(double seconds) const {
    return std::max(1, static_cast<int>(std::ceil(seconds / tick_dt - 1e-9)));
  }
};

struct VmFrame {
  const std::vector<Node>* nodes = nullptr;
  std::size_t index = 0;
  bool operator==(const VmFrame&) const = default;
};

struct RunningAction {
  ActionName name = ActionName::idle;
  std::vector<double> args;
  int remaining_ticks = 0;
  bool operator==(const RunningAction&) const = default;
};

// Execution state of one agent's branch. Frames point into the branch held
// by `active_branch`, which is immutable and shared between copies.
struct VmState {
  std::shared_ptr<const BehaviorBranch> active_branch;
  std::vector<VmFrame> frames;
  std::optional<RunningAction> current_action;
  // Whether an action has started since the last pass through the root.
  bool circuit_started_action = false;
  std::size_t iteration_guard = 0;
  std::size_t node_total = 0;

  bool operator==(const VmState&) const = default;
};

// Replaces whatever the agent was doing; takes effect on the next step.
inline void apply_branch(VmState& vm, BehaviorBranch branch) {
  vm.active_branch = std::make_shared<const BehaviorBranch>(std::move(branch));
  vm.frames.assign(1, VmFrame{&vm.active_branch->nodes, 0});
  vm.current_action.reset();
  vm.circuit_started_action = false;
  vm.iteration_guard = 0;
  vm.node_total = count_nodes(*vm.active_branch);
}

inline void clear_branch(VmState& vm) {
  vm.active_branch.reset();
  vm.frames.clear();
  vm.current_action.reset();
  vm.circuit_started_action = false;
  vm.node_total = 0;
}

namespace vm_detail {

inline Vec2 self_pos(const SensorSnapshot& s) { return {s.self_x, s.self_z}; }
inline Vec2 opponent_pos(const SensorSnapshot& s) { return {s.opponent_x, s.opponent_z}; }

inline Vec2 away_from_opponent(const SensorSnapshot& s) {
  Vec2 v = self_pos(s) - opponent_pos(s);
  if (v.length() > 0.0) return v;
  return {s.self_x <= 0.0 ? -1.0 : 1.0, 0.0};
}

inline bool goal_reached(const RunningAction& a, const SensorSnapshot& s, const VmTiming& t) {
  switch (a.name) {
    case ActionName::approach: return s.distance_to_opponent <= t.approach_stop_distance;
    case ActionName::move_to:
      return (Vec2{a.args[0], a.args[1]} - self_pos(s)).length() <= t.arrive_distance;
    default: return false;
  }
}

inline Intent ongoing_intent(const RunningAction& a, const SensorSnapshot& s) {
  switch (a.name) {
    case ActionName::approach: return Intent::move(opponent_pos(s) - self_pos(s));
    case ActionName::retreat: return Intent::move(away_from_opponent(s));
    case ActionName::move_to: return Intent::move(Vec2{a.args[0], a.args[1]} - self_pos(s));
    case ActionName::idle: return Intent::idle();
    default: return Intent::continue_action();
  }
}

inline AttackKind attack_of(ActionName a) {
  switch (a) {
    case ActionName::iron_tail: return AttackKind::iron_tail;
    case ActionName::tackle: return AttackKind::tackle;
    default: return AttackKind::thunderbolt;
  }
}

inline void finish_action(VmState& vm) {
  vm.current_action.reset();
  ++vm.frames.back().index;
}

// Starts an action on this tick and returns its first intent.
inline Intent start_action(VmState& vm, const ActionNode& node, const SensorSnapshot& s, const VmTiming& t) {
  vm.circuit_started_action = true;
  RunningAction a{node.name, node.args, 1};
  Intent first;
  switch (node.name) {
    case ActionName::thunderbolt:
      a.remaining_ticks = t.thunderbolt_ticks;
      first = Intent::start_attack(AttackKind::thunderbolt);
      break;
    case ActionName::iron_tail:
      a.remaining_ticks = t.iron_tail_ticks;
      first = Intent::start_attack(AttackKind::iron_tail);
      break;
    case ActionName::tackle:
      a.remaining_ticks = t.tackle_ticks;
      first = Intent::start_attack(AttackKind::tackle);
      break;
    case ActionName::idle:
      a.remaining_ticks = t.idle_ticks(node.args[0]);
      first = Intent::idle();
      break;
    case ActionName::retreat:
      a.remaining_ticks = t.retreat_ticks;
      first = ongoing_intent(a, s);
      break;
    case ActionName::approach:
    case ActionName::move_to:
      // Already there: the action still spends this one tick.
      if (goal_reached(a, s, t)) {
        first = Intent::idle();
      } else {
        a.remaining_ticks = node.name == ActionName::approach ? t.approach_max_ticks : t.move_to_max_ticks;
        first = ongoing_intent(a, s);
      }
      break;
  }
  a.remaining_ticks -= 1;
  vm.current_action = std::move(a);
  if (vm.current_action->remaining_ticks <= 0) finish_action(vm);
  return first;
}

inline Intent interpret(VmState& vm, const SensorSnapshot& s, const VmTiming& t) {
  while (vm.active_branch) {
    VmFrame& frame = vm.frames.back();
    if (frame.index >= frame.nodes->size()) {
      vm.frames.pop_back();
      if (vm.frames.empty()) {
        clear_branch(vm);
        break;
      }
      ++vm.frames.back().index;
      continue;
    }
    const Node& node = (*frame.nodes)[frame.index];
    ++vm.iteration_guard;
    assert(vm.iteration_guard <= 2 * vm.node_total && "branch VM loop-safety bound exceeded");

    if (const auto* a = std::get_if<ActionNode>(&node.value)) return start_action(vm, *a, s, t);
    if (const auto* c = std::get_if<ConditionNode>(&node.value)) {
      const auto& arm = eval_predicate(c->predicate, s) ? c->then_nodes : c->else_nodes;
      vm.frames.push_back(VmFrame{&arm, 0});
      continue;
    }
    if (std::get<ControlNode>(node.value).name == ControlName::end) {
      clear_branch(vm);
      break;
    }
    // repeat: back to the root. A circuit that started nothing costs a tick.
    vm.frames.assign(1, VmFrame{&vm.active_branch->nodes, 0});
    if (!vm.circuit_started_action) return Intent::idle();
    vm.circuit_started_action = false;
  }
  return Intent::idle();
}

}  // namespace vm_detail

// Advances the agent's branch by one tick and returns its intent.
inline Intent step(VmState& vm, const SensorSnapshot& sensors, const VmTiming& timing) {
  vm.iteration_guard = 0;
  if (vm.current_action) {
    RunningAction& a = *vm.current_action;
    if (vm_detail::goal_reached(a, sensors, timing)) {
      vm_detail::finish_action(vm);
    } else {
      Intent intent = vm_detail::ongoing_intent(a, sensors);
      if (--a.remaining_ticks <= 0) vm_detail::finish_action(vm);
      return intent;
    }
  }
  return vm_detail::interpret(vm, sensors, timing);
}

}  // namespace cmdbattle
