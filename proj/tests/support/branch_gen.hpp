#pragma once

// Random generators for valid branches, predicates and sensor snapshots.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "cmdbattle/branch.hpp"

namespace cmdbattle::testing {

class BranchGen {
 public:
  struct Limits {
    std::size_t max_nodes = kMaxBranchNodes;
    int max_depth = kMaxBranchDepth;
    int max_predicate_depth = kMaxPredicateDepth;
    // Round numeric arguments to this many decimals (<0: raw doubles).
    int decimals = -1;
  };

  explicit BranchGen(std::uint64_t seed) : rng_(seed) {}
  BranchGen(std::uint64_t seed, Limits limits) : rng_(seed), limits_(limits) {}

  BehaviorBranch branch() {
    budget_ = 1 + pick(limits_.max_nodes - 1);
    BehaviorBranch b;
    b.nodes = list(1, true);
    return b;
  }

  Predicate predicate(int max_depth) {
    int kind = static_cast<int>(pick(max_depth <= 1 ? 2 : 5));
    switch (kind) {
      case 0: return Predicate::compare(operand(), static_cast<CompareOp>(pick(6)), operand());
      case 1:
        if (chance(0.5)) return Predicate::flag_of(SensorVariable::opponent_is_attacking);
        return Predicate::compare(variable(), static_cast<CompareOp>(pick(6)), number(-30, 120));
      case 2: return Predicate::negate(predicate(max_depth - 1));
      default: {
        std::vector<Predicate> parts;
        std::size_t n = 2 + pick(2);
        for (std::size_t i = 0; i < n; ++i) parts.push_back(predicate(max_depth - 1));
        return kind == 3 ? Predicate::all_of(std::move(parts)) : Predicate::any_of(std::move(parts));
      }
    }
  }

  SensorSnapshot snapshot() {
    SensorSnapshot s;
    s.self_x = number(-20, 20);
    s.self_z = number(-20, 20);
    s.opponent_x = number(-20, 20);
    s.opponent_z = number(-20, 20);
    s.distance_to_opponent = std::hypot(s.opponent_x - s.self_x, s.opponent_z - s.self_z);
    s.self_hp = std::round(number(0, 100));
    s.opponent_hp = std::round(number(0, 100));
    s.elapsed_time = number(0, 180);
    s.opponent_is_attacking = chance(0.3);
    return s;
  }

  std::mt19937_64& rng() { return rng_; }

  std::size_t pick(std::size_t n) {
    if (n == 0) return 0;
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
  }
  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  double number(double lo, double hi) {
    double v = std::uniform_real_distribution<double>(lo, hi)(rng_);
    if (limits_.decimals >= 0) {
      double scale = std::pow(10.0, limits_.decimals);
      v = std::round(v * scale) / scale;
    }
    return v;
  }

 private:
  std::vector<Node> list(int depth, bool non_empty) {
    std::vector<Node> out;
    std::size_t want = non_empty ? 1 + pick(4) : pick(4);
    for (std::size_t i = 0; i < want && budget_ > 0; ++i) out.push_back(node(depth));
    return out;
  }

  Node node(int depth) {
    --budget_;
    std::size_t roll = pick(10);
    if (roll < 3 && depth < limits_.max_depth && budget_ > 0) {
      auto then_nodes = list(depth + 1, false);
      auto else_nodes = list(depth + 1, false);
      return condition(predicate(1 + static_cast<int>(pick(limits_.max_predicate_depth))),
                       std::move(then_nodes), std::move(else_nodes));
    }
    if (roll < 4) return control(chance(0.7) ? ControlName::repeat : ControlName::end);
    auto name = static_cast<ActionName>(pick(kActionNames.size()));
    std::vector<double> args;
    if (name == ActionName::move_to) args = {number(-25, 25), number(-25, 25)};
    if (name == ActionName::idle) {
      double secs = number(0.01, 1.0);
      args = {secs > 0 ? secs : 0.05};
    }
    return action(name, std::move(args));
  }

  Operand operand() {
    if (chance(0.6)) return variable();
    return number(-50, 150);
  }

  SensorVariable variable() { return static_cast<SensorVariable>(pick(kSensorCount)); }

  std::mt19937_64 rng_;
  Limits limits_;
  std::size_t budget_ = 0;
};

// Sensor stream for one agent walking around, sometimes close to the opponent.
inline std::vector<SensorSnapshot> walk(BranchGen& g, std::size_t n) {
  std::vector<SensorSnapshot> out;
  SensorSnapshot s = g.snapshot();
  for (std::size_t i = 0; i < n; ++i) {
    if (g.chance(0.2)) {
      s = g.snapshot();
    } else {
      s.self_x += g.number(-0.3, 0.3);
      s.opponent_x += g.number(-0.3, 0.3);
      if (g.chance(0.1)) {
        s.opponent_x = s.self_x + g.number(-1.4, 1.4);
        s.opponent_z = s.self_z;
      }
      if (g.chance(0.05)) s.opponent_x = s.self_x, s.opponent_z = s.self_z;
      s.distance_to_opponent = std::hypot(s.opponent_x - s.self_x, s.opponent_z - s.self_z);
      s.opponent_is_attacking = g.chance(0.3);
      s.elapsed_time += 0.05;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace cmdbattle::testing
