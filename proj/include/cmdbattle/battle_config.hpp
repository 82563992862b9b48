#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "cmdbattle/intent.hpp"

namespace cmdbattle {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Arena and combat constants. Lengths in meters, times in seconds.
struct BattleConfig {
  double tick_dt = 0.05;
  double arena_half_extent = 20.0;
  double agent_radius = 0.5;
  double spawn_a_x = -8.0;
  double spawn_a_z = 0.0;
  double spawn_b_x = 8.0;
  double spawn_b_z = 0.0;
  int max_hp = 100;
  double move_speed = 4.0;

  double thunderbolt_speed = 15.0;
  double thunderbolt_radius = 0.5;
  int thunderbolt_damage = 10;
  double thunderbolt_cooldown = 2.0;
  double thunderbolt_cast = 0.2;

  double iron_tail_range = 2.0;
  double iron_tail_arc_deg = 120.0;
  int iron_tail_damage = 15;
  double iron_tail_windup = 0.4;
  double iron_tail_cooldown = 1.5;

  double tackle_speed = 10.0;
  double tackle_distance = 5.0;
  int tackle_damage = 12;
  double tackle_cooldown = 3.0;
  double tackle_miss_stun = 0.5;

  double battle_time_limit = 180.0;

  // Whole ticks covering `seconds`, at least one.
  int ticks(double seconds) const {
    return std::max(1, static_cast<int>(std::llround(seconds / tick_dt)));
  }

  int cast_ticks() const { return ticks(thunderbolt_cast); }
  int windup_ticks() const { return ticks(iron_tail_windup); }
  int stun_ticks() const { return ticks(tackle_miss_stun); }
  int time_limit_ticks() const { return ticks(battle_time_limit); }
  int cooldown_ticks(AttackKind k) const {
    switch (k) {
      case AttackKind::thunderbolt: return ticks(thunderbolt_cooldown);
      case AttackKind::iron_tail: return ticks(iron_tail_cooldown);
      case AttackKind::tackle: return ticks(tackle_cooldown);
    }
    return 1;
  }
  int damage(AttackKind k) const {
    switch (k) {
      case AttackKind::thunderbolt: return thunderbolt_damage;
      case AttackKind::iron_tail: return iron_tail_damage;
      case AttackKind::tackle: return tackle_damage;
    }
    return 0;
  }
  Vec2 spawn_a() const { return {spawn_a_x, spawn_a_z}; }
  Vec2 spawn_b() const { return {spawn_b_x, spawn_b_z}; }
  // Projectile center distance that counts as a hit.
  double hit_distance() const { return thunderbolt_radius + agent_radius; }
  // Agent center distance that counts as tackle contact.
  double contact_distance() const { return 2.0 * agent_radius; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(tick_dt, "tick_dt");
    positive(arena_half_extent, "arena_half_extent");
    positive(agent_radius, "agent_radius");
    positive(max_hp, "max_hp");
    positive(move_speed, "move_speed");
    positive(thunderbolt_speed, "thunderbolt_speed");
    positive(thunderbolt_radius, "thunderbolt_radius");
    positive(thunderbolt_damage, "thunderbolt_damage");
    positive(thunderbolt_cooldown, "thunderbolt_cooldown");
    positive(thunderbolt_cast, "thunderbolt_cast");
    positive(iron_tail_range, "iron_tail_range");
    positive(iron_tail_arc_deg, "iron_tail_arc_deg");
    positive(iron_tail_damage, "iron_tail_damage");
    positive(iron_tail_windup, "iron_tail_windup");
    positive(iron_tail_cooldown, "iron_tail_cooldown");
    positive(tackle_speed, "tackle_speed");
    positive(tackle_distance, "tackle_distance");
    positive(tackle_damage, "tackle_damage");
    positive(tackle_cooldown, "tackle_cooldown");
    positive(tackle_miss_stun, "tackle_miss_stun");
    positive(battle_time_limit, "battle_time_limit");
    if (iron_tail_arc_deg > 360.0) throw ConfigError("iron_tail_arc_deg must be <= 360");
    auto inside = [this](double v) { return std::abs(v) <= arena_half_extent; };
    if (!inside(spawn_a_x) || !inside(spawn_a_z) || !inside(spawn_b_x) || !inside(spawn_b_z)) {
      throw ConfigError("spawn points must lie inside the arena");
    }
  }

  bool operator==(const BattleConfig&) const = default;
};

#define CMDBATTLE_CONFIG_FIELDS(X)                                                                          \
  X(tick_dt) X(arena_half_extent) X(agent_radius) X(spawn_a_x) X(spawn_a_z) X(spawn_b_x) X(spawn_b_z)      \
  X(max_hp) X(move_speed) X(thunderbolt_speed) X(thunderbolt_radius) X(thunderbolt_damage)                 \
  X(thunderbolt_cooldown) X(thunderbolt_cast) X(iron_tail_range) X(iron_tail_arc_deg) X(iron_tail_damage) \
  X(iron_tail_windup) X(iron_tail_cooldown) X(tackle_speed) X(tackle_distance) X(tackle_damage)           \
  X(tackle_cooldown) X(tackle_miss_stun) X(battle_time_limit)

inline nlohmann::ordered_json config_to_json(const BattleConfig& c) {
  nlohmann::ordered_json j;
#define X(field) j[#field] = c.field;
  CMDBATTLE_CONFIG_FIELDS(X)
#undef X
  return j;
}

// Flat object; keys missing from `j` keep their defaults, unknown keys are
// rejected. The result is validated.
template <typename Json>
BattleConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("battle config must be a JSON object");
  BattleConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const auto& value = it.value();
    bool known = false;
#define X(field)                                                                              \
  if (key == #field) {                                                                        \
    if (!value.is_number()) throw ConfigError("config key '" + key + "' must be a number"); \
    c.field = value.template get<decltype(c.field)>();                                        \
    known = true;                                                                             \
  }
    CMDBATTLE_CONFIG_FIELDS(X)
#undef X
    if (!known) throw ConfigError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

#undef CMDBATTLE_CONFIG_FIELDS

inline BattleConfig load_battle_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open battle config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("battle config " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace cmdbattle
