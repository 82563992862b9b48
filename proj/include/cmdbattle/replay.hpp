#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmdbattle/battle.hpp"
#include "cmdbattle/branch_json.hpp"
#include "cmdbattle/dsl.hpp"
#include "cmdbattle/translator.hpp"
#include "cmdbattle/vm.hpp"

namespace cmdbattle {

// A battle plus the two agents' branch VMs, advanced together.
struct Match {
  WorldState world;
  std::array<VmState, 2> vms;
  VmTiming timing;

  Match(const BattleConfig& config, std::uint64_t seed)
      : world(new_battle(config, seed)), timing(VmTiming::from(config)) {}

  VmState& vm(Side s) { return vms[index_of(s)]; }

  std::vector<Event> advance() {
    if (world.paused || world.outcome.decided()) return {};
    Intent a = step(vms[0], sensors_for(world, Side::A), timing);
    Intent b = step(vms[1], sensors_for(world, Side::B), timing);
    return tick(world, a, b);
  }
};

inline std::string transcript_line(const WorldState& w, const std::vector<Event>& events) {
  nlohmann::ordered_json line;
  line["tick"] = w.tick;
  line["hash"] = hash_hex(state_hash(w));
  line["events"] = nlohmann::ordered_json::array();
  for (const auto& e : events) line["events"].push_back(event_to_json(e));
  return line.dump();
}

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScriptCommand {
  std::uint64_t tick = 0;  // applied before this tick is simulated
  Side side = Side::A;
  std::string text;
  std::optional<BehaviorBranch> fixture;  // set: skip the translator
};

struct ReplayScript {
  std::uint64_t seed = 0;
  std::vector<ScriptCommand> commands;
  std::optional<std::uint64_t> max_ticks;
};

// {"seed": n, "max_ticks": n?, "commands": [{"tick": n, "side": "A"|"B",
//   "text": "...", "translator": "mock"|"fixture", "branch": DSL text or JSON}]}
inline ReplayScript script_from_json(const nlohmann::json& j) {
  auto where = [](std::size_t i) { return "commands[" + std::to_string(i) + "]"; };
  if (!j.is_object()) throw ScriptError("script must be a JSON object");
  ReplayScript s;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ScriptError("seed must be a non-negative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("max_ticks")) {
    if (!j["max_ticks"].is_number_unsigned()) throw ScriptError("max_ticks must be a non-negative integer");
    s.max_ticks = j["max_ticks"].get<std::uint64_t>();
  }
  if (!j.contains("commands")) return s;
  if (!j["commands"].is_array()) throw ScriptError("commands must be an array");
  std::uint64_t last_tick = 0;
  for (std::size_t i = 0; i < j["commands"].size(); ++i) {
    const auto& c = j["commands"][i];
    if (!c.is_object()) throw ScriptError(where(i) + " must be an object");
    ScriptCommand cmd;
    if (!c.contains("tick") || !c["tick"].is_number_unsigned()) {
      throw ScriptError(where(i) + ".tick must be a non-negative integer");
    }
    cmd.tick = c["tick"].get<std::uint64_t>();
    if (cmd.tick < last_tick) throw ScriptError(where(i) + ".tick goes backwards");
    last_tick = cmd.tick;
    std::string side = c.value("side", "");
    if (side != "A" && side != "B") throw ScriptError(where(i) + ".side must be \"A\" or \"B\"");
    cmd.side = side == "A" ? Side::A : Side::B;
    if (c.contains("text")) {
      if (!c["text"].is_string()) throw ScriptError(where(i) + ".text must be a string");
      cmd.text = c["text"].get<std::string>();
    }
    std::string translator = c.value("translator", "mock");
    if (translator == "fixture") {
      if (!c.contains("branch")) throw ScriptError(where(i) + ": fixture commands need a branch");
      try {
        if (c["branch"].is_string()) {
          cmd.fixture = parse(c["branch"].get<std::string>());
        } else {
          cmd.fixture = branch_from_json(c["branch"]);
        }
      } catch (const std::exception& e) {
        throw ScriptError(where(i) + ".branch: " + e.what());
      }
    } else if (translator != "mock") {
      throw ScriptError(where(i) + ".translator must be \"mock\" or \"fixture\"");
    } else if (c.contains("branch")) {
      throw ScriptError(where(i) + ": branch given for a mock command");
    }
    s.commands.push_back(std::move(cmd));
  }
  return s;
}

// FNV-1a over the transcript exactly as written to a file (one line each,
// newline-terminated).
inline std::string transcript_hash(const std::vector<std::string>& lines) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](char c) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  };
  for (const auto& line : lines) {
    for (char c : line) feed(c);
    feed('\n');
  }
  return hash_hex(h);
}

struct ReplayResult {
  Outcome outcome;
  std::uint64_t ticks = 0;
  std::array<int, 2> hp{};
  std::vector<std::string> transcript;
};

// Runs the script to an outcome (or max_ticks). Mock commands whose text the
// translator rejects (empty, too long) are skipped, as a live server would.
inline ReplayResult run_replay(const ReplayScript& script, const BattleConfig& config) {
  Match m(config, script.seed);
  ReplayResult r;
  std::size_t next = 0;
  std::uint64_t limit = script.max_ticks.value_or(UINT64_MAX);
  while (!m.world.outcome.decided() && m.world.tick < limit) {
    std::uint64_t upcoming = m.world.tick + 1;
    while (next < script.commands.size() && script.commands[next].tick <= upcoming) {
      const auto& c = script.commands[next++];
      if (c.fixture) {
        apply_branch(m.vm(c.side), *c.fixture);
      } else {
        try {
          checked_command(c.text);
          apply_branch(m.vm(c.side), mock_translate(c.text));
        } catch (const TranslateError&) {
        }
      }
    }
    auto events = m.advance();
    r.transcript.push_back(transcript_line(m.world, events));
  }
  r.outcome = m.world.outcome;
  r.ticks = m.world.tick;
  r.hp = {m.world.agents[0].hp, m.world.agents[1].hp};
  return r;
}

}  // namespace cmdbattle
