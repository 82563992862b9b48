#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string_view>

namespace cmdbattle {

struct Vec2 {
  double x = 0.0;
  double z = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, z + o.z}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, z - o.z}; }
  Vec2 operator*(double k) const { return {x * k, z * k}; }
  double dot(Vec2 o) const { return x * o.x + z * o.z; }
  double length() const { return std::sqrt(x * x + z * z); }
  bool operator==(const Vec2&) const = default;
};

// Unit vector along `v`, or nullopt for a zero vector.
inline std::optional<Vec2> unit(Vec2 v) {
  double len = v.length();
  if (!(len > 0.0)) return std::nullopt;
  return Vec2{v.x / len, v.z / len};
}

enum class AttackKind { thunderbolt, iron_tail, tackle };

inline constexpr std::array<std::string_view, 3> kAttackNames = {"thunderbolt", "iron_tail", "tackle"};

constexpr std::string_view attack_name(AttackKind k) { return kAttackNames[static_cast<std::size_t>(k)]; }

// What an agent wants to do this tick; the engine decides what happens.
struct Intent {
  enum class Kind { idle, move, start_attack, continue_action };

  Kind kind = Kind::idle;
  Vec2 direction;  // unit vector, move only
  AttackKind attack = AttackKind::thunderbolt;

  static Intent idle() { return {}; }
  static Intent continue_action() { return {Kind::continue_action, {}, AttackKind::thunderbolt}; }
  static Intent start_attack(AttackKind k) { return {Kind::start_attack, {}, k}; }
  // Zero vectors degrade to idle.
  static Intent move(Vec2 v) {
    auto u = unit(v);
    if (!u) return idle();
    return {Kind::move, *u, AttackKind::thunderbolt};
  }

  bool operator==(const Intent& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::move) return direction == o.direction;
    if (kind == Kind::start_attack) return attack == o.attack;
    return true;
  }
};

}  // namespace cmdbattle
