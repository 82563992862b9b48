#pragma once

// Session hosting: the Hub pairs connections into sessions and each session
// runs on its own thread, fed through an inbox. Transport-agnostic; see
// ws_transport.hpp for the WebSocket front end.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <iostream>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>

#include <boost/uuid/name_generator_sha1.hpp>
#include <boost/uuid/random_generator.hpp>
#include <boost/uuid/uuid_io.hpp>

#include "cmdbattle/session.hpp"

namespace cmdbattle {

// One connected client. Implementations must be thread-safe and must not
// block: messages are queued and written in order.
class ClientLink {
 public:
  virtual ~ClientLink() = default;
  virtual void send(std::string text) = 0;
  // Flushes what was queued, then closes.
  virtual void close() = 0;
};

// Runs one translation; must honor the stop token.
using TranslateFn = std::function<TranslationOutcome(const std::string& text, std::stop_token stop)>;

// Adapts a CompletionEndpoint + prompt template to TranslateFn.
inline TranslateFn endpoint_translator(std::shared_ptr<CompletionEndpoint> endpoint, PromptTemplate tmpl,
                                       std::chrono::milliseconds timeout) {
  return [endpoint = std::move(endpoint), tmpl = std::move(tmpl), timeout](const std::string& text,
                                                                          std::stop_token stop) {
    TranslationOutcome out;
    auto start = Clock::now();
    try {
      TranslateOptions o;
      o.timeout = timeout;
      o.stop = std::move(stop);
      auto r = translate(text, *endpoint, tmpl, o);
      out.branch = std::move(r.branch);
      out.latency_ms = r.latency_ms;
    } catch (const TranslateError& e) {
      out.error_code = error_code_name(e.code());
      out.message = e.what();
      out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    }
    return out;
  };
}

inline std::int64_t unix_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

struct ServerOptions {
  BattleConfig config;
  SessionTiming timing;
  // Wall-clock time per simulation tick; defaults to the config's tick_dt.
  std::optional<std::chrono::microseconds> tick_interval;
  // Fixed seed for every session (tests); random otherwise.
  std::optional<std::uint64_t> seed;
};

class SessionRunner {
 public:
  using Input = std::function<Effects(Session&, SteadyTime)>;

  SessionRunner(std::string id, const ServerOptions& opts, std::uint64_t seed, TranslateFn translator,
                std::shared_ptr<LogSink> logs, std::function<void(const std::string&)> on_end)
      : session_(std::move(id), opts.config, seed, opts.timing),
        interval_(opts.tick_interval.value_or(
            std::chrono::microseconds(static_cast<std::int64_t>(opts.config.tick_dt * 1e6)))),
        translator_(std::move(translator)),
        logs_(std::move(logs)),
        on_end_(std::move(on_end)) {
    thread_ = std::jthread([this](std::stop_token st) { run(st); });
  }

  ~SessionRunner() {
    thread_.request_stop();
    wake_.notify_all();
    if (thread_.joinable()) thread_.join();
    for (auto& w : workers_) w.thread.request_stop();
    workers_.clear();
  }

  const std::string& id() const { return session_.id(); }
  bool finished() const { return finished_; }

  void post(Input in) {
    {
      std::lock_guard lock(mu_);
      inbox_.push_back(std::move(in));
    }
    wake_.notify_all();
  }

  void attach(Side side, std::shared_ptr<ClientLink> link, std::string player_id, std::string name) {
    post([this, side, link = std::move(link), player_id = std::move(player_id), name = std::move(name)](
             Session& s, SteadyTime) mutable {
      links_[index_of(side)] = std::move(link);
      return s.join(side, std::move(player_id), std::move(name));
    });
  }

  void detach(Side side) {
    post([this, side](Session& s, SteadyTime now) {
      links_[index_of(side)].reset();
      return s.disconnect(side, now);
    });
  }

  // Ends the battle as a drawn forfeit and waits until the end message and
  // logs are out.
  void shutdown() {
    post([](Session& s, SteadyTime) { return s.shutdown(); });
    std::unique_lock lock(mu_);
    done_.wait(lock, [this] { return finished_.load(); });
  }

 private:
  void run(std::stop_token st) {
    auto next_tick = std::chrono::steady_clock::now() + interval_;
    while (!st.stop_requested() && !finished_) {
      std::deque<Input> batch;
      {
        std::unique_lock lock(mu_);
        auto wake_at = std::min(next_tick, std::chrono::steady_clock::now() + std::chrono::milliseconds(50));
        wake_.wait_until(lock, wake_at, [&] { return !inbox_.empty() || st.stop_requested(); });
        batch.swap(inbox_);
      }
      for (auto& in : batch) {
        dispatch(in(session_, std::chrono::steady_clock::now()));
        if (session_.ended()) break;
      }
      auto now = std::chrono::steady_clock::now();
      if (!session_.ended() && session_.running()) {
        if (now >= next_tick) {
          dispatch(session_.tick());
          next_tick += interval_;
          if (now - next_tick > 10 * interval_) next_tick = now + interval_;  // fell behind, don't burst
        }
      } else {
        next_tick = now + interval_;
      }
      if (!session_.ended()) dispatch(session_.poll(now));
      if (session_.ended()) finish();
    }
  }

  void dispatch(Effects fx) {
    for (const auto& rec : fx.logs) {
      try {
        if (logs_) logs_->append(rec);
      } catch (const std::exception& e) {
        std::cerr << "command log: " << e.what() << "\n";
        for (auto& l : links_) {
          if (l) l->send(protocol::error("log_unavailable", "command could not be logged"));
        }
      }
    }
    for (auto& o : fx.out) {
      for (Side s : {Side::A, Side::B}) {
        bool wanted = o.to == Outbound::To::both || o.to == to_side(s);
        auto& link = links_[index_of(s)];
        if (wanted && link) link->send(o.text);
      }
    }
    for (auto& job : fx.jobs) {
      workers_.remove_if([](const Worker& w) { return w.done->load(); });
      auto done = std::make_shared<std::atomic<bool>>(false);
      workers_.push_back({std::jthread([this, job, done](std::stop_token st) {
                            TranslationOutcome result = translator_(job.text, st);
                            if (!st.stop_requested()) {
                              post([id = job.id, result = std::move(result)](Session& s, SteadyTime now) mutable {
                                return s.translation_done(id, std::move(result), now);
                              });
                            }
                            *done = true;
                          }),
                          done});
    }
  }

  void finish() {
    for (auto& l : links_) {
      if (l) l->close();
      l.reset();
    }
    for (auto& w : workers_) w.thread.request_stop();
    {
      std::lock_guard lock(mu_);
      finished_ = true;
    }
    done_.notify_all();
    if (on_end_) on_end_(session_.id());
  }

  Session session_;
  std::chrono::microseconds interval_;
  TranslateFn translator_;
  std::shared_ptr<LogSink> logs_;
  std::function<void(const std::string&)> on_end_;
  std::array<std::shared_ptr<ClientLink>, 2> links_;
  struct Worker {
    std::jthread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::list<Worker> workers_;

  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable done_;
  std::deque<Input> inbox_;
  std::atomic<bool> finished_{false};
  std::jthread thread_;  // last: starts after everything above exists
};

class Hub {
 public:
  Hub(ServerOptions opts, TranslateFn translator, std::shared_ptr<LogSink> logs)
      : opts_(std::move(opts)), translator_(std::move(translator)), logs_(std::move(logs)) {}

  ~Hub() { shutdown(); }

  // `bearer` gives a stable player id across connections.
  void on_open(const std::shared_ptr<ClientLink>& link, std::optional<std::string> bearer = std::nullopt) {
    std::lock_guard lock(mu_);
    reap();
    Conn c;
    if (bearer && !bearer->empty()) {
      boost::uuids::name_generator_sha1 gen(kTokenNamespace);
      c.player_id = boost::uuids::to_string(gen(*bearer));
    } else {
      c.player_id = boost::uuids::to_string(uuid_gen_());
    }
    conns_[link.get()] = std::move(c);
  }

  void on_message(const std::shared_ptr<ClientLink>& link, std::string_view frame) {
    auto parsed = protocol::parse_client(frame);
    if (auto* err = std::get_if<protocol::ProtocolError>(&parsed)) {
      link->send(protocol::error(err->code, err->message));
      return;
    }
    auto& msg = std::get<protocol::ClientMessage>(parsed);
    std::lock_guard lock(mu_);
    auto it = conns_.find(link.get());
    if (it == conns_.end()) return;
    Conn& conn = it->second;
    if (auto* join = std::get_if<protocol::Join>(&msg)) {
      handle_join(link, conn, *join);
      return;
    }
    auto runner = conn.runner.lock();
    if (!runner) {
      link->send(protocol::error("not_joined", "send a join message first"));
      return;
    }
    Side side = conn.side;
    std::visit(
        [&](auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, protocol::TypingStart>) {
            runner->post([side](Session& s, SteadyTime now) { return s.typing_start(side, now); });
          } else if constexpr (std::is_same_v<T, protocol::TypingCancel>) {
            runner->post([side](Session& s, SteadyTime now) { return s.typing_cancel(side, now); });
          } else if constexpr (std::is_same_v<T, protocol::Command>) {
            runner->post([side, text = m.text, wall = unix_ms()](Session& s, SteadyTime now) {
              return s.command(side, text, now, wall);
            });
          }
        },
        msg);
  }

  void on_close(const std::shared_ptr<ClientLink>& link) {
    std::lock_guard lock(mu_);
    auto it = conns_.find(link.get());
    if (it == conns_.end()) return;
    if (auto runner = it->second.runner.lock()) {
      auto seat = seats_.find(runner->id());
      if (seat != seats_.end()) seat->second[index_of(it->second.side)] = SeatState::left;
      runner->detach(it->second.side);
    }
    conns_.erase(it);
  }

  // Ends every session (drawn forfeit), flushing logs and end messages.
  void shutdown() {
    std::map<std::string, std::shared_ptr<SessionRunner>> all;
    {
      std::lock_guard lock(mu_);
      all = runners_;
    }
    for (auto& [id, r] : all) {
      if (!r->finished()) r->shutdown();
    }
    std::list<std::shared_ptr<SessionRunner>> old;
    {
      std::lock_guard lock(mu_);
      for (auto& [id, r] : runners_) old.push_back(r);
      runners_.clear();
      seats_.clear();
      old.splice(old.end(), retired_);
    }
    // Runner threads may still be on their way out through retire(); join
    // them without holding the lock.
    all.clear();
    old.clear();
  }

  std::size_t session_count() {
    std::lock_guard lock(mu_);
    reap();
    return runners_.size();
  }

 private:
  enum class SeatState { free, taken, left };

  struct Conn {
    std::string player_id;
    std::weak_ptr<SessionRunner> runner;
    Side side = Side::A;
  };

  inline static const boost::uuids::uuid kTokenNamespace = boost::uuids::name_generator_sha1(
      boost::uuids::uuid{})("cmdbattle-player");

  void handle_join(const std::shared_ptr<ClientLink>& link, Conn& conn, const protocol::Join& join) {
    if (conn.runner.lock()) {
      link->send(protocol::error("already_joined", "this connection is already in a session"));
      return;
    }
    std::shared_ptr<SessionRunner> runner;
    Side side = Side::A;
    if (join.session == "new") {
      std::string id = boost::uuids::to_string(uuid_gen_());
      std::uint64_t seed = opts_.seed.value_or(std::uniform_int_distribution<std::uint64_t>()(seed_rng_));
      runner = std::make_shared<SessionRunner>(id, opts_, seed, translator_, logs_,
                                               [this](const std::string& ended) { retire(ended); });
      runners_[id] = runner;
      seats_[id] = {SeatState::free, SeatState::free};
    } else {
      auto it = runners_.find(join.session);
      if (it == runners_.end() || it->second->finished()) {
        link->send(protocol::error("unknown_session", "no open session '" + join.session + "'"));
        return;
      }
      runner = it->second;
      auto& seats = seats_[join.session];
      if (seats[0] == SeatState::free) {
        side = Side::A;
      } else if (seats[1] == SeatState::free) {
        side = Side::B;
      } else {
        link->send(protocol::error("session_full", "session already has two players"));
        return;
      }
    }
    seats_[runner->id()][index_of(side)] = SeatState::taken;
    conn.runner = runner;
    conn.side = side;
    runner->attach(side, link, conn.player_id, join.player_name);
  }

  // Called from a runner thread once its session is over.
  void retire(const std::string& id) {
    std::lock_guard lock(mu_);
    auto it = runners_.find(id);
    if (it == runners_.end()) return;
    retired_.push_back(it->second);
    runners_.erase(it);
    seats_.erase(id);
    for (auto& [ptr, c] : conns_) {
      if (auto r = c.runner.lock(); r && r->id() == id) c.runner.reset();
    }
  }

  // Joins finished runner threads (never from the runner's own thread).
  void reap() {
    retired_.remove_if([](const std::shared_ptr<SessionRunner>& r) { return r->finished() && r.use_count() == 1; });
  }

  ServerOptions opts_;
  TranslateFn translator_;
  std::shared_ptr<LogSink> logs_;
  std::mutex mu_;
  std::map<ClientLink*, Conn> conns_;
  std::map<std::string, std::shared_ptr<SessionRunner>> runners_;
  std::map<std::string, std::array<SeatState, 2>> seats_;
  std::list<std::shared_ptr<SessionRunner>> retired_;
  boost::uuids::random_generator uuid_gen_;
  std::mt19937_64 seed_rng_{std::random_device{}()};
};

}  // namespace cmdbattle
