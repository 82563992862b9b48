#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace cmdbattle {

// Closed set of quantities a condition predicate may read.
enum class SensorVariable {
  distance_to_opponent,
  self_hp,
  opponent_hp,
  self_x,
  self_z,
  opponent_x,
  opponent_z,
  elapsed_time,
  opponent_is_attacking,
};

inline constexpr std::size_t kSensorCount = 9;

inline constexpr std::array<std::string_view, kSensorCount> kSensorNames = {
    "distance_to_opponent", "self_hp",    "opponent_hp",
    "self_x",               "self_z",     "opponent_x",
    "opponent_z",           "elapsed_time", "opponent_is_attacking",
};

constexpr std::string_view sensor_name(SensorVariable v) {
  return kSensorNames[static_cast<std::size_t>(v)];
}

constexpr std::optional<SensorVariable> sensor_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kSensorCount; ++i) {
    if (kSensorNames[i] == name) return static_cast<SensorVariable>(i);
  }
  return std::nullopt;
}

// Boolean sensors may appear bare in a predicate and compare as 1/0.
constexpr bool is_boolean_sensor(SensorVariable v) {
  return v == SensorVariable::opponent_is_attacking;
}

// One agent's view of the world at a tick.
struct SensorSnapshot {
  double distance_to_opponent = 0.0;
  double self_hp = 0.0;
  double opponent_hp = 0.0;
  double self_x = 0.0;
  double self_z = 0.0;
  double opponent_x = 0.0;
  double opponent_z = 0.0;
  double elapsed_time = 0.0;
  bool opponent_is_attacking = false;

  double value(SensorVariable v) const {
    switch (v) {
      case SensorVariable::distance_to_opponent: return distance_to_opponent;
      case SensorVariable::self_hp: return self_hp;
      case SensorVariable::opponent_hp: return opponent_hp;
      case SensorVariable::self_x: return self_x;
      case SensorVariable::self_z: return self_z;
      case SensorVariable::opponent_x: return opponent_x;
      case SensorVariable::opponent_z: return opponent_z;
      case SensorVariable::elapsed_time: return elapsed_time;
      case SensorVariable::opponent_is_attacking: return opponent_is_attacking ? 1.0 : 0.0;
    }
    return 0.0;
  }

  bool operator==(const SensorSnapshot&) const = default;
};

}  // namespace cmdbattle
