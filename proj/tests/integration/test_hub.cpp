#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "support/test_client.hpp"

using namespace cmdbattle;
using namespace std::chrono_literals;
using nlohmann::json;
using cmdbattle::testing::RecordingLink;

namespace {

class MemorySink : public LogSink {
 public:
  void append(const LogRecord& r) override {
    std::lock_guard lock(mu_);
    records_.push_back(r);
  }
  std::vector<LogRecord> records() {
    std::lock_guard lock(mu_);
    return records_;
  }

 private:
  std::mutex mu_;
  std::vector<LogRecord> records_;
};

class FailingSink : public LogSink {
 public:
  void append(const LogRecord&) override { throw std::runtime_error("disk full"); }
};

TranslateFn mock_translator() {
  return endpoint_translator(std::make_shared<MockEndpoint>(), PromptTemplate::defaults(), 5s);
}

// Holds every translation until release() so tests can keep one pending.
struct GatedTranslator {
  std::mutex mu;
  std::condition_variable cv;
  bool open = false;

  TranslateFn fn() {
    return [this](const std::string& text, std::stop_token st) {
      std::unique_lock lock(mu);
      while (!open && !st.stop_requested()) cv.wait_for(lock, 5ms);
      TranslationOutcome o;
      if (st.stop_requested()) {
        o.error_code = "cancelled";
        return o;
      }
      o.branch = mock_translate(text);
      return o;
    };
  }
  void release() {
    {
      std::lock_guard lock(mu);
      open = true;
    }
    cv.notify_all();
  }
};

ServerOptions fast_options() {
  ServerOptions o;
  o.tick_interval = std::chrono::microseconds(1000);
  o.seed = 11;
  return o;
}

std::string msg(json j) { return j.dump(); }

struct Pair {
  std::shared_ptr<RecordingLink> a = std::make_shared<RecordingLink>();
  std::shared_ptr<RecordingLink> b = std::make_shared<RecordingLink>();
  std::string session;

  explicit Pair(Hub& hub) {
    hub.on_open(a);
    hub.on_open(b);
    hub.on_message(a, msg({{"type", "join"}, {"session", "new"}, {"player_name", "ann"}}));
    auto j = a->wait_type("joined");
    REQUIRE(j);
    session = a->messages()[*j]["session_id"];
    hub.on_message(b, msg({{"type", "join"}, {"session", session}, {"player_name", "ben"}}));
    REQUIRE(a->wait_type("start"));
    REQUIRE(b->wait_type("start"));
  }
};

// Checks the pause invariant on one client's message stream and returns the
// number of paused/resumed pairs seen.
int check_pauses(const std::vector<json>& ms) {
  int pairs = 0;
  bool paused = false;
  std::optional<std::uint64_t> pause_tick;
  std::uint64_t last_tick = 0;
  bool expect_pause_snapshot = false;
  bool expect_resume_snapshot = false;
  for (const auto& m : ms) {
    const std::string type = m["type"];
    if (type == "paused") {
      CHECK_FALSE(paused);
      paused = true;
      expect_pause_snapshot = true;
    } else if (type == "resumed") {
      CHECK(paused);
      paused = false;
      expect_resume_snapshot = true;
      ++pairs;
    } else if (type == "state") {
      std::uint64_t t = m["tick"];
      CHECK(t >= last_tick);
      last_tick = t;
      if (expect_pause_snapshot) {
        CHECK(m["paused"] == true);
        pause_tick = t;
        expect_pause_snapshot = false;
      } else if (expect_resume_snapshot) {
        CHECK(m["paused"] == false);
        REQUIRE(pause_tick);
        CHECK(t == *pause_tick);
        expect_resume_snapshot = false;
      } else if (paused) {
        CHECK(t == *pause_tick);
      }
    }
  }
  CHECK_FALSE(paused);
  return pairs;
}

}  // namespace

TEST_CASE("hub: join errors and protocol errors keep the connection") {
  Hub hub(fast_options(), mock_translator(), nullptr);
  auto c = std::make_shared<RecordingLink>();
  hub.on_open(c);
  auto last_error = [&] {
    auto ms = c->messages();
    REQUIRE_FALSE(ms.empty());
    REQUIRE(ms.back()["type"] == "error");
    return ms.back()["code"].get<std::string>();
  };
  hub.on_message(c, "{not json");
  CHECK(last_error() == "bad_message");
  hub.on_message(c, "[1,2]");
  CHECK(last_error() == "bad_message");
  hub.on_message(c, R"({"type":"fly"})");
  CHECK(last_error() == "unknown_type");
  hub.on_message(c, R"({"type":"command"})");
  CHECK(last_error() == "bad_message");
  hub.on_message(c, R"({"type":"command","text":"zap"})");
  CHECK(last_error() == "not_joined");
  hub.on_message(c, R"({"type":"join","session":"nope"})");
  CHECK(last_error() == "unknown_session");
  CHECK_FALSE(c->closed());

  hub.on_message(c, R"({"type":"join","session":"new"})");
  REQUIRE(c->wait_type("joined"));
  hub.on_message(c, R"({"type":"join","session":"new"})");
  CHECK(last_error() == "already_joined");
  hub.on_message(c, R"({"type":"typing_start"})");
  REQUIRE(c->wait_for([](const json& m) { return m.value("code", "") == "not_started"; }));
  CHECK(hub.session_count() == 1);
}

TEST_CASE("hub: third player is turned away") {
  Hub hub(fast_options(), mock_translator(), nullptr);
  Pair p(hub);
  auto c = std::make_shared<RecordingLink>();
  hub.on_open(c);
  hub.on_message(c, msg({{"type", "join"}, {"session", p.session}}));
  REQUIRE(c->messages().size() == 1);
  CHECK(c->messages()[0]["code"] == "session_full");

  auto ja = p.a->messages()[*p.a->wait_type("joined")];
  auto jb = p.b->messages()[*p.b->wait_type("joined")];
  CHECK(ja["side"] == "A");
  CHECK(jb["side"] == "B");
  CHECK(ja["player_id"] != jb["player_id"]);
  CHECK(ja["session_id"].get<std::string>().size() == 36);
}

TEST_CASE("hub: bearer tokens give stable player ids") {
  Hub hub(fast_options(), mock_translator(), nullptr);
  auto id_for = [&](std::optional<std::string> token) {
    auto c = std::make_shared<RecordingLink>();
    hub.on_open(c, token);
    hub.on_message(c, R"({"type":"join","session":"new"})");
    auto j = c->wait_type("joined");
    REQUIRE(j);
    std::string id = c->messages()[*j]["player_id"];
    hub.on_close(c);
    return id;
  };
  CHECK(id_for("tok-1") == id_for("tok-1"));
  CHECK(id_for("tok-1") != id_for("tok-2"));
  CHECK(id_for(std::nullopt) != id_for(std::nullopt));
}

TEST_CASE("hub: no tick passes between paused and resumed") {
  MemorySink* sink = nullptr;
  auto logs = std::make_shared<MemorySink>();
  sink = logs.get();
  Hub hub(fast_options(), mock_translator(), logs);
  Pair p(hub);
  const std::vector<std::string> calm = {"keep your distance", "stay away", "retreat a bit"};

  for (int cycle = 0; cycle < 24; ++cycle) {
    std::size_t mark = p.b->messages().size();
    switch (cycle % 4) {
      case 0:  // one player types, then cancels
        hub.on_message(p.a, R"({"type":"typing_start"})");
        std::this_thread::sleep_for(3ms);
        hub.on_message(p.a, R"({"type":"typing_cancel"})");
        break;
      case 1:  // overlapping typing from both
        hub.on_message(p.a, R"({"type":"typing_start"})");
        hub.on_message(p.b, R"({"type":"typing_start"})");
        std::this_thread::sleep_for(2ms);
        hub.on_message(p.a, R"({"type":"typing_cancel"})");
        std::this_thread::sleep_for(2ms);
        hub.on_message(p.b, msg({{"type", "command"}, {"text", calm[cycle % 3]}}));
        break;
      case 2:  // type, then submit
        hub.on_message(p.b, R"({"type":"typing_start"})");
        hub.on_message(p.b, msg({{"type", "command"}, {"text", calm[cycle % 3]}}));
        break;
      case 3:  // both submit while the other is typing
        hub.on_message(p.a, R"({"type":"typing_start"})");
        hub.on_message(p.b, R"({"type":"typing_start"})");
        hub.on_message(p.a, msg({{"type", "command"}, {"text", calm[cycle % 3]}}));
        std::this_thread::sleep_for(2ms);
        hub.on_message(p.b, msg({{"type", "command"}, {"text", calm[(cycle + 1) % 3]}}));
        break;
    }
    REQUIRE(p.b->wait_type("resumed", mark));
    // let the battle run a little between cycles
    auto now = p.b->messages().size();
    REQUIRE(p.b->wait_type("state", now));
  }
  hub.shutdown();
  for (auto* c : {p.a.get(), p.b.get()}) {
    auto ms = c->messages();
    CHECK(check_pauses(ms) >= 20);
    CHECK(ms.back() == json{{"type", "end"}, {"winner", "draw"}, {"reason", "forfeit"}});
  }
  // 4 commands per 4 cycles
  CHECK(sink->records().size() == 24);
  for (const auto& r : sink->records()) CHECK(r.status == "applied");
}

TEST_CASE("hub: extra fields from a client cannot change the battle") {
  Hub hub(fast_options(), mock_translator(), nullptr);
  Pair p(hub);
  hub.on_message(p.a, R"({"type":"typing_start","hp":1,"tick":99999,"agents":[]})");
  REQUIRE(p.b->wait_type("paused"));
  hub.on_message(p.a, R"({"type":"command","text":"zap","branch":{"nodes":[]},"player":"B","hp":0})");
  auto i = p.b->wait_type("branch");
  REQUIRE(i);
  auto br = p.b->messages()[*i];
  CHECK(br["player"] == "A");
  CHECK(decode_json(br["branch"].dump()) == mock_translate("zap"));
  auto s = p.a->wait_for([](const json& m) { return m["type"] == "state" && m["tick"] > 10; });
  REQUIRE(s);
  for (const auto& a : p.a->messages()[*s]["agents"]) CHECK(a["hp"] <= 100);
}

TEST_CASE("hub: busy while a translation is pending") {
  GatedTranslator gate;
  auto logs = std::make_shared<MemorySink>();
  Hub hub(fast_options(), gate.fn(), logs);
  Pair p(hub);
  hub.on_message(p.a, R"({"type":"command","text":"zap"})");
  hub.on_message(p.a, R"({"type":"command","text":"tail"})");
  auto e = p.a->wait_type("error");
  REQUIRE(e);
  CHECK(p.a->messages()[*e]["code"] == "busy");
  CHECK(logs->records().empty());  // held until the first command resolves
  gate.release();
  REQUIRE(p.a->wait_type("resumed"));
  auto recs = logs->records();
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].status == "applied");
  CHECK(recs[0].command_text == "zap");
  CHECK(recs[1].error_code == "busy");
}

TEST_CASE("hub: leaving forfeits after the grace period") {
  auto opts = fast_options();
  opts.timing.forfeit_grace = 100ms;
  Hub hub(opts, mock_translator(), nullptr);
  Pair p(hub);
  hub.on_close(p.a);
  auto e = p.b->wait_type("end");
  REQUIRE(e);
  CHECK(p.b->messages()[*e] == json{{"type", "end"}, {"winner", "B"}, {"reason", "forfeit"}});
  CHECK(p.b->wait_closed());
  for (int i = 0; i < 100 && hub.session_count() > 0; ++i) std::this_thread::sleep_for(5ms);
  CHECK(hub.session_count() == 0);
}

TEST_CASE("hub: shutdown cancels pending translations and logs them") {
  GatedTranslator gate;
  auto logs = std::make_shared<MemorySink>();
  Hub hub(fast_options(), gate.fn(), logs);
  Pair p(hub);
  hub.on_message(p.b, R"({"type":"command","text":"zap"})");
  REQUIRE(p.a->wait_type("paused"));
  hub.shutdown();
  CHECK(p.a->wait_closed());
  CHECK(p.a->messages().back()["type"] == "end");
  auto recs = logs->records();
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].error_code == "ended");
}

TEST_CASE("hub: log failures are reported to players") {
  Hub hub(fast_options(), mock_translator(), std::make_shared<FailingSink>());
  Pair p(hub);
  hub.on_message(p.a, R"({"type":"command","text":"zap"})");
  auto e = p.b->wait_for([](const json& m) { return m.value("code", "") == "log_unavailable"; });
  CHECK(e);
  CHECK(p.b->wait_type("branch"));
}

TEST_CASE("hub: a full battle ends in a KO") {
  auto logs = std::make_shared<MemorySink>();
  Hub hub(fast_options(), mock_translator(), logs);
  Pair p(hub);
  hub.on_message(p.a, R"({"type":"command","text":"zap zap zap"})");
  auto e = p.b->wait_type("end", 0, 5s);
  REQUIRE(e);
  CHECK(p.b->messages()[*e] == json{{"type", "end"}, {"winner", "A"}, {"reason", "ko"}});
  auto before = p.b->messages()[*e - 1];
  CHECK(before["type"] == "state");
  CHECK(before["agents"][1]["hp"] == 0);
  CHECK(p.a->wait_closed());
  REQUIRE(logs->records().size() == 1);
  CHECK(logs->records()[0].session_id == p.session);
}
