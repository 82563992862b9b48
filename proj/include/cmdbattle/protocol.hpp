#pragma once

// JSON messages between players and the server, one object per frame.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "cmdbattle/battle.hpp"
#include "cmdbattle/branch_json.hpp"

namespace cmdbattle::protocol {

struct Join {
  std::string session;  // an id, or "new"
  std::string player_name;
};
struct TypingStart {};
struct TypingCancel {};
struct Command {
  std::string text;
};

using ClientMessage = std::variant<Join, TypingStart, TypingCancel, Command>;

struct ProtocolError {
  std::string code;  // bad_message or unknown_type
  std::string message;
};

// Any other fields a client sends (positions, hp, ...) are ignored.
inline std::variant<ClientMessage, ProtocolError> parse_client(std::string_view frame) {
  auto j = nlohmann::json::parse(frame, nullptr, false);
  if (j.is_discarded()) return ProtocolError{"bad_message", "frame is not valid JSON"};
  if (!j.is_object()) return ProtocolError{"bad_message", "frame must be a JSON object"};
  if (!j.contains("type") || !j["type"].is_string()) return ProtocolError{"bad_message", "missing string field 'type'"};
  const std::string type = j["type"].get<std::string>();
  auto text_field = [&j](const char* name) -> std::optional<std::string> {
    if (!j.contains(name) || !j[name].is_string()) return std::nullopt;
    return j[name].get<std::string>();
  };
  if (type == "join") {
    auto session = text_field("session");
    if (!session || session->empty()) return ProtocolError{"bad_message", "join needs a 'session' string"};
    auto name = text_field("player_name");
    if (j.contains("player_name") && !name) return ProtocolError{"bad_message", "'player_name' must be a string"};
    return ClientMessage{Join{*session, name.value_or("")}};
  }
  if (type == "typing_start") return ClientMessage{TypingStart{}};
  if (type == "typing_cancel") return ClientMessage{TypingCancel{}};
  if (type == "command") {
    auto text = text_field("text");
    if (!text) return ProtocolError{"bad_message", "command needs a 'text' string"};
    return ClientMessage{Command{*text}};
  }
  return ProtocolError{"unknown_type", "unknown message type '" + type + "'"};
}

using Json = nlohmann::ordered_json;

inline std::string joined(const std::string& session_id, const std::string& player_id, Side side) {
  Json j;
  j["type"] = "joined";
  j["session_id"] = session_id;
  j["player_id"] = player_id;
  j["side"] = side_name(side);
  return j.dump();
}

inline std::string start(const BattleConfig& config) {
  Json j;
  j["type"] = "start";
  j["config"] = config_to_json(config);
  return j.dump();
}

// Besides the documented fields each agent carries its facing and, while
// attacking, which attack.
inline std::string state(const WorldState& w) {
  Json j;
  j["type"] = "state";
  j["tick"] = w.tick;
  j["agents"] = Json::array();
  for (const auto& a : w.agents) {
    Json aj;
    aj["side"] = side_name(a.side);
    aj["x"] = a.position.x;
    aj["z"] = a.position.z;
    aj["hp"] = a.hp;
    aj["status"] = status_name(a.status);
    aj["facing_x"] = a.facing.x;
    aj["facing_z"] = a.facing.z;
    if (a.status == AgentStatus::attacking) aj["attack"] = attack_name(a.attack);
    j["agents"].push_back(std::move(aj));
  }
  j["projectiles"] = Json::array();
  for (const auto& p : w.projectiles) j["projectiles"].push_back(Json{{"x", p.position.x}, {"z", p.position.z}});
  j["paused"] = w.paused;
  return j.dump();
}

inline std::string paused(Side by) {
  Json j;
  j["type"] = "paused";
  j["by"] = side_name(by);
  return j.dump();
}

inline std::string resumed() { return R"({"type":"resumed"})"; }

inline std::string branch(Side player, const std::string& command, const BehaviorBranch& b, std::int64_t latency_ms) {
  Json j;
  j["type"] = "branch";
  j["player"] = side_name(player);
  j["command"] = command;
  j["branch"] = branch_to_json(b);
  j["latency_ms"] = latency_ms;
  return j.dump();
}

inline std::string error(const std::string& code, const std::string& message) {
  Json j;
  j["type"] = "error";
  j["code"] = code;
  j["message"] = message;
  return j.dump();
}

inline std::string end(const Outcome& o) {
  Json j;
  j["type"] = "end";
  j["winner"] = o.winner_text();
  j["reason"] = o.reason;
  return j.dump();
}

}  // namespace cmdbattle::protocol
