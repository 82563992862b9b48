#pragma once

// One two-player battle session as a plain state machine: every input
// returns the messages, log records and translation jobs it causes, and the
// caller (a runner thread, or a test) carries them out.

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmdbattle/log_store.hpp"
#include "cmdbattle/protocol.hpp"
#include "cmdbattle/replay.hpp"
#include "cmdbattle/translator.hpp"

namespace cmdbattle {

using SteadyTime = std::chrono::steady_clock::time_point;

struct SessionTiming {
  std::chrono::milliseconds pause_cap{60000};
  std::chrono::milliseconds forfeit_grace{15000};
  std::uint64_t snapshot_every = 2;
};

enum class Phase { lobby, running, paused, ended };

constexpr const char* phase_name(Phase p) {
  switch (p) {
    case Phase::lobby: return "lobby";
    case Phase::running: return "running";
    case Phase::paused: return "paused";
    case Phase::ended: return "ended";
  }
  return "lobby";
}

struct Outbound {
  enum class To { A, B, both };
  To to;
  std::string text;
};

constexpr Outbound::To to_side(Side s) { return s == Side::A ? Outbound::To::A : Outbound::To::B; }

struct TranslationJob {
  std::uint64_t id = 0;
  Side side = Side::A;
  std::string text;
};

struct TranslationOutcome {
  std::optional<BehaviorBranch> branch;  // set on success
  std::string error_code;
  std::string message;
  std::int64_t latency_ms = 0;
};

struct Effects {
  std::vector<Outbound> out;
  std::vector<LogRecord> logs;
  std::vector<TranslationJob> jobs;
  bool ended = false;

  void send(Outbound::To to, std::string text) { out.push_back({to, std::move(text)}); }
  void append(Effects&& more) {
    for (auto& o : more.out) out.push_back(std::move(o));
    for (auto& l : more.logs) logs.push_back(std::move(l));
    for (auto& j : more.jobs) jobs.push_back(std::move(j));
    ended = ended || more.ended;
  }
};

struct PlayerSlot {
  std::string player_id;
  std::string name;
  bool present = false;
  bool typing = false;
  std::optional<std::uint64_t> pending_job;
  std::optional<SteadyTime> disconnected_at;
};

class Session {
 public:
  Session(std::string id, const BattleConfig& config, std::uint64_t seed, SessionTiming timing = {})
      : id_(std::move(id)), match_(config, seed), timing_(timing) {}

  const std::string& id() const { return id_; }
  Phase phase() const { return phase_; }
  const WorldState& world() const { return match_.world; }
  const VmState& vm(Side s) const { return match_.vms[index_of(s)]; }
  const PlayerSlot& player(Side s) const { return players_[index_of(s)]; }
  bool running() const { return phase_ == Phase::running; }
  bool ended() const { return phase_ == Phase::ended; }

  std::optional<Side> free_side() const {
    if (phase_ != Phase::lobby) return std::nullopt;
    for (Side s : {Side::A, Side::B}) {
      if (!player(s).present) return s;
    }
    return std::nullopt;
  }

  Effects join(Side side, std::string player_id, std::string name) {
    Effects fx;
    PlayerSlot& p = slot(side);
    p = PlayerSlot{};
    p.player_id = std::move(player_id);
    p.name = std::move(name);
    p.present = true;
    fx.send(to_side(side), protocol::joined(id_, p.player_id, side));
    if (player(other(side)).present) {
      phase_ = Phase::running;
      fx.send(Outbound::To::both, protocol::start(match_.world.config));
      fx.send(Outbound::To::both, protocol::state(match_.world));
    }
    return fx;
  }

  Effects typing_start(Side side, SteadyTime now) {
    Effects fx;
    if (!playing(side, fx)) return fx;
    slot(side).typing = true;
    update_pause(side, now, fx);
    return fx;
  }

  Effects typing_cancel(Side side, SteadyTime now) {
    Effects fx;
    if (!playing(side, fx)) return fx;
    slot(side).typing = false;
    update_pause(side, now, fx);
    return fx;
  }

  // `wall_ms` is the Unix time the command arrived; it becomes the log
  // record's timestamp.
  Effects command(Side side, const std::string& text, SteadyTime now, std::int64_t wall_ms) {
    Effects fx;
    if (!playing(side, fx)) return fx;
    PlayerSlot& p = slot(side);
    p.typing = false;  // submitting ends typing, whatever becomes of the command
    std::uint64_t seq = next_seq_++;
    LogRecord rec;
    rec.session_id = id_;
    rec.timestamp_ms = wall_ms;
    rec.player_id = p.player_id;
    rec.command_text = text;

    auto reject_now = [&](const std::string& code, const std::string& message) {
      rec.status = "rejected";
      rec.error_code = code;
      logs_[seq] = std::move(rec);
      fx.send(to_side(side), protocol::error(code, message));
      flush_logs(fx);
      update_pause(side, now, fx);
    };
    if (p.pending_job) {
      reject_now("busy", "a command is already being translated");
      return fx;
    }
    try {
      checked_command(text);
    } catch (const TranslateError& e) {
      reject_now(error_code_name(e.code()), e.what());
      return fx;
    }
    logs_[seq] = std::nullopt;
    drafts_[seq] = std::move(rec);
    p.pending_job = seq;
    fx.jobs.push_back({seq, side, text});
    update_pause(side, now, fx);
    return fx;
  }

  Effects translation_done(std::uint64_t job, TranslationOutcome result, SteadyTime now) {
    Effects fx;
    auto draft = drafts_.find(job);
    if (draft == drafts_.end()) return fx;
    LogRecord rec = std::move(draft->second);
    drafts_.erase(draft);
    Side side = Side::A;
    for (Side s : {Side::A, Side::B}) {
      if (player(s).pending_job == job) side = s;
    }
    slot(side).pending_job.reset();
    rec.latency_ms = result.latency_ms;
    if (phase_ == Phase::ended) {
      rec.status = "rejected";
      rec.error_code = "ended";
    } else if (result.branch) {
      rec.status = "applied";
      rec.branch_json = branch_to_json(*result.branch);
      apply_branch(match_.vm(side), *result.branch);
      fx.send(Outbound::To::both, protocol::branch(side, rec.command_text, *result.branch, result.latency_ms));
    } else {
      rec.status = "rejected";
      rec.error_code = result.error_code;
      fx.send(to_side(side), protocol::error(result.error_code, result.message));
    }
    logs_[job] = std::move(rec);
    flush_logs(fx);
    if (phase_ != Phase::ended) update_pause(side, now, fx);
    return fx;
  }

  // One simulation step, if the battle is running.
  Effects tick() {
    Effects fx;
    if (phase_ != Phase::running) return fx;
    match_.advance();
    const WorldState& w = match_.world;
    if (w.tick % timing_.snapshot_every == 0 || w.outcome.decided()) fx.send(Outbound::To::both, protocol::state(w));
    if (w.outcome.decided()) finish(fx);
    return fx;
  }

  // Timers: pause cap and disconnect grace.
  Effects poll(SteadyTime now) {
    Effects fx;
    if (phase_ == Phase::ended) return fx;
    if (phase_ == Phase::paused && now - paused_since_ >= timing_.pause_cap) {
      for (auto& p : players_) p.typing = false;
      update_pause(Side::A, now, fx);
      paused_since_ = now;  // still held by a translation: start a new window
    }
    if (phase_ == Phase::lobby) return fx;
    std::array<bool, 2> gone{};
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& at = players_[i].disconnected_at;
      gone[i] = at && now - *at >= timing_.forfeit_grace;
    }
    if (gone[0] || gone[1]) {
      bool a_left = players_[0].disconnected_at.has_value();
      bool b_left = players_[1].disconnected_at.has_value();
      if (a_left && b_left) {
        forfeit(match_.world, std::nullopt);
      } else {
        forfeit(match_.world, a_left ? Side::B : Side::A);
      }
      finish(fx);
    }
    return fx;
  }

  Effects disconnect(Side side, SteadyTime now) {
    Effects fx;
    PlayerSlot& p = slot(side);
    if (!p.present || phase_ == Phase::ended) return fx;
    if (phase_ == Phase::lobby) {
      p = PlayerSlot{};
      if (!player(other(side)).present) {
        phase_ = Phase::ended;
        fx.ended = true;
      }
      return fx;
    }
    p.disconnected_at = now;
    p.typing = false;
    update_pause(side, now, fx);
    return fx;
  }

  // Server going away: the battle ends as a drawn forfeit.
  Effects shutdown() {
    Effects fx;
    if (phase_ == Phase::ended) return fx;
    forfeit(match_.world, std::nullopt);
    finish(fx);
    return fx;
  }

  // Ticks of the battle so far; also the tick number of the last snapshot.
  std::uint64_t tick_count() const { return match_.world.tick; }

 private:
  PlayerSlot& slot(Side s) { return players_[index_of(s)]; }

  bool playing(Side side, Effects& fx) {
    if (phase_ == Phase::lobby) {
      fx.send(to_side(side), protocol::error("not_started", "waiting for the second player"));
      return false;
    }
    if (phase_ == Phase::ended) {
      fx.send(to_side(side), protocol::error("ended", "the battle is over"));
      return false;
    }
    return true;
  }

  // Paused exactly while someone types or a translation is outstanding;
  // messages go out only on transitions, each followed by a snapshot so
  // clients see the tick the pause began and ended on.
  void update_pause(Side cause, SteadyTime now, Effects& fx) {
    bool hold = false;
    for (const auto& p : players_) hold = hold || p.typing || p.pending_job.has_value();
    if (hold && phase_ == Phase::running) {
      phase_ = Phase::paused;
      paused_since_ = now;
      set_paused(match_.world, true);
      fx.send(Outbound::To::both, protocol::paused(cause));
      fx.send(Outbound::To::both, protocol::state(match_.world));
    } else if (!hold && phase_ == Phase::paused) {
      phase_ = Phase::running;
      set_paused(match_.world, false);
      fx.send(Outbound::To::both, protocol::resumed());
      fx.send(Outbound::To::both, protocol::state(match_.world));
    }
  }

  void finish(Effects& fx) {
    if (match_.world.paused) set_paused(match_.world, false);
    phase_ = Phase::ended;
    for (auto& p : players_) {
      p.typing = false;
      p.pending_job.reset();
    }
    // Commands still in translation are logged as rejected.
    for (auto& [seq, rec] : drafts_) {
      rec.status = "rejected";
      rec.error_code = "ended";
      logs_[seq] = std::move(rec);
    }
    drafts_.clear();
    flush_logs(fx);
    fx.send(Outbound::To::both, protocol::end(match_.world.outcome));
    fx.ended = true;
  }

  // Hands out finished records in submission order.
  void flush_logs(Effects& fx) {
    while (!logs_.empty() && logs_.begin()->second.has_value()) {
      fx.logs.push_back(std::move(*logs_.begin()->second));
      logs_.erase(logs_.begin());
    }
  }

  std::string id_;
  Match match_;
  SessionTiming timing_;
  Phase phase_ = Phase::lobby;
  std::array<PlayerSlot, 2> players_;
  SteadyTime paused_since_{};
  std::uint64_t next_seq_ = 1;
  std::map<std::uint64_t, std::optional<LogRecord>> logs_;  // by submission order
  std::map<std::uint64_t, LogRecord> drafts_;               // awaiting translation
};

}  // namespace cmdbattle
