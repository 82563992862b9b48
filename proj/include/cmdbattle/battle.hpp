#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmdbattle/battle_config.hpp"
#include "cmdbattle/intent.hpp"
#include "cmdbattle/sensors.hpp"

namespace cmdbattle {

enum class Side { A, B };

constexpr Side other(Side s) { return s == Side::A ? Side::B : Side::A; }
constexpr std::size_t index_of(Side s) { return s == Side::A ? 0 : 1; }
constexpr const char* side_name(Side s) { return s == Side::A ? "A" : "B"; }

enum class AgentStatus { normal, attacking, stunned };

struct AgentState {
  Side side = Side::A;
  Vec2 position;
  Vec2 facing{1.0, 0.0};
  int hp = 0;
  std::array<int, 3> cooldowns{};  // ticks remaining, indexed by AttackKind
  AgentStatus status = AgentStatus::normal;
  AttackKind attack = AttackKind::thunderbolt;
  int timer = 0;               // cast/windup ticks left, or stun ticks left
  double rush_remaining = 0.0;  // tackle distance budget

  bool operator==(const AgentState&) const = default;
};

struct Projectile {
  std::uint32_t id = 0;
  Side owner = Side::A;
  Vec2 position;
  Vec2 velocity;
  bool operator==(const Projectile&) const = default;
};

struct Outcome {
  enum class Kind { none, win, draw };
  Kind kind = Kind::none;
  Side winner = Side::A;
  std::string reason;  // "ko", "timeout" or "forfeit"

  bool decided() const { return kind != Kind::none; }
  static Outcome win(Side s, std::string why) { return {Kind::win, s, std::move(why)}; }
  static Outcome draw(std::string why) { return {Kind::draw, Side::A, std::move(why)}; }
  std::string winner_text() const { return kind == Kind::win ? side_name(winner) : "draw"; }
  bool operator==(const Outcome&) const = default;
};

struct WorldState {
  BattleConfig config;
  std::uint64_t tick = 0;
  std::array<AgentState, 2> agents;
  std::vector<Projectile> projectiles;
  bool paused = false;
  std::uint64_t seed = 0;
  Outcome outcome;
  std::uint32_t next_projectile_id = 1;

  AgentState& agent(Side s) { return agents[index_of(s)]; }
  const AgentState& agent(Side s) const { return agents[index_of(s)]; }
  bool operator==(const WorldState&) const = default;
};

struct Event {
  enum class Type { attack_started, hit, projectile_spawned, projectile_expired, battle_end };
  Type type = Type::attack_started;
  Side side = Side::A;  // actor: attacker, projectile owner, or winner
  AttackKind attack = AttackKind::thunderbolt;
  int damage = 0;
  int target_hp = 0;
  std::uint32_t projectile = 0;
  Outcome outcome;

  static Event started(Side s, AttackKind k) {
    Event e;
    e.side = s;
    e.attack = k;
    return e;
  }
  static Event hit(Side s, AttackKind k, int damage, int target_hp) {
    Event e = started(s, k);
    e.type = Type::hit;
    e.damage = damage;
    e.target_hp = target_hp;
    return e;
  }
  static Event projectile_event(Type t, Side s, std::uint32_t id) {
    Event e;
    e.type = t;
    e.side = s;
    e.projectile = id;
    return e;
  }
  static Event end(const Outcome& o) {
    Event e;
    e.type = Type::battle_end;
    e.side = o.winner;
    e.outcome = o;
    return e;
  }

  bool operator==(const Event&) const = default;
};

inline nlohmann::ordered_json event_to_json(const Event& e) {
  nlohmann::ordered_json j;
  switch (e.type) {
    case Event::Type::attack_started:
      j["type"] = "attack_started";
      j["side"] = side_name(e.side);
      j["attack"] = attack_name(e.attack);
      break;
    case Event::Type::hit:
      j["type"] = "hit";
      j["side"] = side_name(e.side);
      j["attack"] = attack_name(e.attack);
      j["damage"] = e.damage;
      j["target_hp"] = e.target_hp;
      break;
    case Event::Type::projectile_spawned:
      j["type"] = "projectile_spawned";
      j["side"] = side_name(e.side);
      j["projectile"] = e.projectile;
      break;
    case Event::Type::projectile_expired:
      j["type"] = "projectile_expired";
      j["side"] = side_name(e.side);
      j["projectile"] = e.projectile;
      break;
    case Event::Type::battle_end:
      j["type"] = "battle_end";
      j["winner"] = e.outcome.winner_text();
      j["reason"] = e.outcome.reason;
      break;
  }
  return j;
}

inline WorldState new_battle(const BattleConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState w;
  w.config = config;
  w.seed = seed;
  w.agents[0].side = Side::A;
  w.agents[0].position = config.spawn_a();
  w.agents[1].side = Side::B;
  w.agents[1].position = config.spawn_b();
  for (auto& a : w.agents) a.hp = config.max_hp;
  // Start facing each other.
  if (auto d = unit(w.agents[1].position - w.agents[0].position)) {
    w.agents[0].facing = *d;
    w.agents[1].facing = *d * -1.0;
  }
  return w;
}

inline SensorSnapshot sensors_for(const WorldState& w, Side side) {
  const AgentState& self = w.agent(side);
  const AgentState& opp = w.agent(other(side));
  SensorSnapshot s;
  s.distance_to_opponent = (opp.position - self.position).length();
  s.self_hp = self.hp;
  s.opponent_hp = opp.hp;
  s.self_x = self.position.x;
  s.self_z = self.position.z;
  s.opponent_x = opp.position.x;
  s.opponent_z = opp.position.z;
  s.elapsed_time = static_cast<double>(w.tick) * w.config.tick_dt;
  s.opponent_is_attacking = opp.status == AgentStatus::attacking;
  return s;
}

inline void set_paused(WorldState& w, bool paused) { w.paused = paused; }

namespace battle_detail {

inline constexpr double kEps = 1e-9;

inline Vec2 clamp_to_arena(Vec2 p, double half) {
  return {std::clamp(p.x, -half, half), std::clamp(p.z, -half, half)};
}

inline bool outside_arena(Vec2 p, double half) { return std::abs(p.x) > half || std::abs(p.z) > half; }

inline void face_opponent(AgentState& self, Vec2 opponent) {
  if (auto d = unit(opponent - self.position)) self.facing = *d;
}

}  // namespace battle_detail

// Advances the battle by one tick. Both sides resolve against the same
// snapshot at every stage, so swapping the sides of a mirrored world yields
// the mirrored result. A paused or finished battle is left untouched.
inline std::vector<Event> tick(WorldState& w, const Intent& intent_a, const Intent& intent_b) {
  using namespace battle_detail;
  std::vector<Event> events;
  if (w.paused || w.outcome.decided()) return events;

  const BattleConfig& cfg = w.config;
  const double dt = cfg.tick_dt;
  const double half = cfg.arena_half_extent;
  const std::array<const Intent*, 2> intents = {&intent_a, &intent_b};
  ++w.tick;

  // (1) timers and cooldowns
  for (auto& a : w.agents) {
    for (int& c : a.cooldowns) c = std::max(0, c - 1);
    if (a.status == AgentStatus::attacking && a.attack != AttackKind::tackle) {
      a.timer = std::max(0, a.timer - 1);
    } else if (a.status == AgentStatus::stunned) {
      if (--a.timer <= 0) {
        a.timer = 0;
        a.status = AgentStatus::normal;
      }
    }
  }

  // (2) movement, from the pre-move positions of both agents
  {
    std::array<Vec2, 2> before = {w.agents[0].position, w.agents[1].position};
    for (std::size_t i = 0; i < 2; ++i) {
      AgentState& a = w.agents[i];
      if (a.status != AgentStatus::normal) continue;
      const Intent& in = *intents[i];
      if (in.kind == Intent::Kind::move) {
        auto dir = unit(in.direction);
        if (!dir) continue;
        a.position = clamp_to_arena(a.position + *dir * (cfg.move_speed * dt), half);
        a.facing = *dir;
      } else if (in.kind == Intent::Kind::idle) {
        face_opponent(a, before[1 - i]);
      }
    }
  }

  // (3) attack starts
  {
    std::array<Vec2, 2> pos = {w.agents[0].position, w.agents[1].position};
    for (std::size_t i = 0; i < 2; ++i) {
      AgentState& a = w.agents[i];
      const Intent& in = *intents[i];
      if (in.kind != Intent::Kind::start_attack) continue;
      auto k = static_cast<std::size_t>(in.attack);
      if (a.status != AgentStatus::normal || a.cooldowns[k] > 0) continue;
      a.status = AgentStatus::attacking;
      a.attack = in.attack;
      a.cooldowns[k] = cfg.cooldown_ticks(in.attack);
      face_opponent(a, pos[1 - i]);
      switch (in.attack) {
        case AttackKind::thunderbolt: a.timer = cfg.cast_ticks(); break;
        case AttackKind::iron_tail: a.timer = cfg.windup_ticks(); break;
        case AttackKind::tackle:
          a.timer = 0;
          a.rush_remaining = cfg.tackle_distance;
          break;
      }
      events.push_back(Event::started(a.side, in.attack));
    }
  }

  auto damage = [&](AgentState& attacker, AttackKind kind) {
    AgentState& target = w.agent(other(attacker.side));
    int amount = cfg.damage(kind);
    target.hp = std::max(0, target.hp - amount);
    events.push_back(Event::hit(attacker.side, kind, amount, 0));
    return events.size() - 1;
  };
  // target_hp is filled in after all damage of the tick is applied.
  std::vector<std::size_t> hit_events;

  // (4) thunderbolt casts that finished spawn a projectile aimed at the
  // opponent's current position
  for (std::size_t i = 0; i < 2; ++i) {
    AgentState& a = w.agents[i];
    if (a.status != AgentStatus::attacking || a.attack != AttackKind::thunderbolt || a.timer > 0) continue;
    a.status = AgentStatus::normal;
    Vec2 target = w.agents[1 - i].position;
    Vec2 dir = unit(target - a.position).value_or(a.facing);
    Projectile p{w.next_projectile_id++, a.side, a.position, dir * cfg.thunderbolt_speed};
    w.projectiles.push_back(p);
    events.push_back(Event::projectile_event(Event::Type::projectile_spawned, a.side, p.id));
  }

  // (5) projectiles
  {
    std::vector<Projectile> alive;
    alive.reserve(w.projectiles.size());
    for (auto& p : w.projectiles) {
      p.position = p.position + p.velocity * dt;
      AgentState& target = w.agent(other(p.owner));
      if ((target.position - p.position).length() <= cfg.hit_distance() + kEps) {
        hit_events.push_back(damage(w.agent(p.owner), AttackKind::thunderbolt));
        continue;
      }
      if (outside_arena(p.position, half)) {
        events.push_back(Event::projectile_event(Event::Type::projectile_expired, p.owner, p.id));
        continue;
      }
      alive.push_back(p);
    }
    w.projectiles = std::move(alive);
  }

  // (6) iron tail at the end of its windup
  {
    const double cos_half_arc = std::cos(cfg.iron_tail_arc_deg * std::numbers::pi / 360.0);
    std::array<bool, 2> lands{};
    for (std::size_t i = 0; i < 2; ++i) {
      const AgentState& a = w.agents[i];
      if (a.status != AgentStatus::attacking || a.attack != AttackKind::iron_tail || a.timer > 0) continue;
      Vec2 to = w.agents[1 - i].position - a.position;
      double dist = to.length();
      bool in_range = dist <= cfg.iron_tail_range + kEps;
      bool in_arc = dist == 0.0 || a.facing.dot(to) >= cos_half_arc * dist - kEps;
      lands[i] = in_range && in_arc;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      AgentState& a = w.agents[i];
      if (a.status != AgentStatus::attacking || a.attack != AttackKind::iron_tail || a.timer > 0) continue;
      a.status = AgentStatus::normal;
      if (lands[i]) hit_events.push_back(damage(a, AttackKind::iron_tail));
    }
  }

  // (7) tackles: both rushes move first, then contact is checked
  {
    std::array<Vec2, 2> pos = {w.agents[0].position, w.agents[1].position};
    std::array<bool, 2> rushing{};
    for (std::size_t i = 0; i < 2; ++i) {
      AgentState& a = w.agents[i];
      if (a.status != AgentStatus::attacking || a.attack != AttackKind::tackle) continue;
      rushing[i] = true;
      Vec2 to = pos[1 - i] - pos[i];
      double gap = std::max(0.0, to.length() - cfg.contact_distance());
      double step = std::min({cfg.tackle_speed * dt, a.rush_remaining, gap});
      if (auto dir = unit(to)) {
        a.position = clamp_to_arena(pos[i] + *dir * step, half);
        a.facing = *dir;
      }
      a.rush_remaining = std::max(0.0, a.rush_remaining - step);
    }
    std::array<bool, 2> contact{};
    for (std::size_t i = 0; i < 2; ++i) {
      if (!rushing[i]) continue;
      contact[i] = (w.agents[1 - i].position - w.agents[i].position).length() <= cfg.contact_distance() + kEps;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      if (!rushing[i]) continue;
      AgentState& a = w.agents[i];
      if (contact[i]) {
        a.status = AgentStatus::normal;
        a.rush_remaining = 0.0;
        hit_events.push_back(damage(a, AttackKind::tackle));
      } else if (a.rush_remaining <= kEps) {
        a.status = AgentStatus::stunned;
        a.timer = cfg.stun_ticks();
        a.rush_remaining = 0.0;
      }
    }
  }

  for (std::size_t idx : hit_events) {
    Event& e = events[idx];
    e.target_hp = w.agent(other(e.side)).hp;
  }

  // (8) outcome
  bool a_down = w.agents[0].hp <= 0;
  bool b_down = w.agents[1].hp <= 0;
  if (a_down && b_down) {
    w.outcome = Outcome::draw("ko");
  } else if (a_down || b_down) {
    w.outcome = Outcome::win(a_down ? Side::B : Side::A, "ko");
  } else if (w.tick >= static_cast<std::uint64_t>(cfg.time_limit_ticks())) {
    int ha = w.agents[0].hp;
    int hb = w.agents[1].hp;
    w.outcome = ha == hb ? Outcome::draw("timeout") : Outcome::win(ha > hb ? Side::A : Side::B, "timeout");
  }
  if (w.outcome.decided()) events.push_back(Event::end(w.outcome));
  return events;
}

// Ends a running battle by forfeit (disconnect or server shutdown).
inline void forfeit(WorldState& w, std::optional<Side> winner) {
  if (w.outcome.decided()) return;
  w.outcome = winner ? Outcome::win(*winner, "forfeit") : Outcome::draw("forfeit");
}

// 64-bit FNV-1a over a fixed little-endian encoding of the mutable state.
inline std::uint64_t state_hash(const WorldState& w) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto byte = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ull;
  };
  auto u64 = [&byte](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) byte(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto f64 = [&u64](double d) { u64(std::bit_cast<std::uint64_t>(d == 0.0 ? 0.0 : d)); };
  auto i64 = [&u64](std::int64_t v) { u64(static_cast<std::uint64_t>(v)); };

  u64(w.tick);
  u64(w.seed);
  byte(w.paused ? 1 : 0);
  for (const auto& a : w.agents) {
    f64(a.position.x);
    f64(a.position.z);
    f64(a.facing.x);
    f64(a.facing.z);
    i64(a.hp);
    for (int c : a.cooldowns) i64(c);
    byte(static_cast<std::uint8_t>(a.status));
    byte(static_cast<std::uint8_t>(a.attack));
    i64(a.timer);
    f64(a.rush_remaining);
  }
  u64(w.projectiles.size());
  for (const auto& p : w.projectiles) {
    u64(p.id);
    byte(static_cast<std::uint8_t>(p.owner));
    f64(p.position.x);
    f64(p.position.z);
    f64(p.velocity.x);
    f64(p.velocity.z);
  }
  byte(static_cast<std::uint8_t>(w.outcome.kind));
  byte(static_cast<std::uint8_t>(w.outcome.winner));
  for (char c : w.outcome.reason) byte(static_cast<std::uint8_t>(c));
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[h & 0xF];
    h >>= 4;
  }
  return out;
}

inline const char* status_name(AgentStatus s) {
  switch (s) {
    case AgentStatus::normal: return "normal";
    case AgentStatus::attacking: return "attacking";
    case AgentStatus::stunned: return "stunned";
  }
  return "normal";
}

}  // namespace cmdbattle
