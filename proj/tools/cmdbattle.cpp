// cmdbattle: serve | replay | logs
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <pthread.h>

#include <CLI11.hpp>

#include "cmdbattle/http_endpoint.hpp"
#include "cmdbattle/replay.hpp"
#include "cmdbattle/ws_transport.hpp"

using namespace cmdbattle;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 1;

// Configuration problems: reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The one place a battle config is read, for every subcommand.
BattleConfig load_config(const std::string& path) {
  if (path.empty()) return BattleConfig{};
  try {
    return load_battle_config(path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

std::pair<std::string, unsigned short> split_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw UsageError("--addr must be host:port, got '" + addr + "'");
  std::string host = addr.substr(0, colon);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("port");
  } catch (const std::exception&) {
    throw UsageError("bad port in --addr '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw UsageError("port out of range in --addr '" + addr + "'");
  if (host.empty()) host = "0.0.0.0";
  return {host, static_cast<unsigned short>(port)};
}

struct ServeArgs {
  std::string addr = "127.0.0.1:8080";
  std::string config;
  std::string log_dir = "logs";
  std::string exemplars;
  std::string web_root;
  std::string translator = "auto";
  double tick_ms = 0;
};

int serve(const ServeArgs& a) {
  ServerOptions opts;
  opts.config = load_config(a.config);
  if (a.tick_ms < 0) throw UsageError("--tick-ms must be positive");
  if (a.tick_ms > 0) opts.tick_interval = std::chrono::microseconds(static_cast<std::int64_t>(a.tick_ms * 1000));
  auto [host, port] = split_addr(a.addr);

  PromptTemplate tmpl = PromptTemplate::defaults();
  if (!a.exemplars.empty()) {
    try {
      tmpl = load_exemplars(a.exemplars);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
  }

  std::optional<EndpointConfig> llm;
  try {
    llm = EndpointConfig::from_env();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  std::shared_ptr<CompletionEndpoint> endpoint;
  std::chrono::milliseconds timeout(30000);
  if (a.translator == "llm" || (a.translator == "auto" && llm)) {
    if (!llm) throw UsageError("--translator llm needs LLM_API_BASE_URL");
    timeout = std::chrono::milliseconds(static_cast<std::int64_t>(llm->timeout_s * 1000));
    endpoint = std::make_shared<HttpCompletionEndpoint>(*llm);
  } else {
    if (a.translator == "auto") std::cerr << "LLM_API_BASE_URL not set; using the mock translator\n";
    endpoint = std::make_shared<MockEndpoint>();
  }

  std::shared_ptr<FileLogStore> logs;
  try {
    logs = std::make_shared<FileLogStore>(a.log_dir);
  } catch (const std::exception& e) {
    std::cerr << "cannot open log dir: " << e.what() << "\n";
    return kRuntime;
  }

  // Handle SIGINT/SIGTERM synchronously: block them before any thread starts.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Hub hub(opts, endpoint_translator(endpoint, tmpl, timeout), logs);
  std::optional<WsServer> server;
  try {
    std::optional<std::filesystem::path> root;
    if (!a.web_root.empty()) root = a.web_root;
    server.emplace(hub, host, port, root);
  } catch (const std::exception& e) {
    std::cerr << "cannot listen on " << a.addr << ": " << e.what() << "\n";
    return kRuntime;
  }
  server->start(std::max(2u, std::thread::hardware_concurrency()));
  std::cout << "listening on " << host << ":" << server->port() << std::endl;

  int sig = 0;
  sigwait(&signals, &sig);
  std::cerr << "shutting down\n";
  hub.shutdown();                                  // end messages out, logs written
  server->stop(std::chrono::milliseconds(200));    // let the final frames drain
  return 0;
}

struct ReplayArgs {
  std::string script;
  std::string out;
  std::string config;
};

int replay(const ReplayArgs& a) {
  BattleConfig config = load_config(a.config);
  ReplayScript script;
  {
    std::ifstream in(a.script);
    if (!in) throw UsageError("cannot open script " + a.script);
    try {
      script = script_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(a.script + ": " + e.what());
    } catch (const ScriptError& e) {
      throw UsageError(a.script + ": " + e.what());
    }
  }
  if (const char* env = std::getenv("REPLAY_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      script.seed = std::stoull(env, &used);
      if (env[used] != '\0' || env[0] == '-') throw std::invalid_argument("seed");
    } catch (const std::exception&) {
      throw UsageError(std::string("REPLAY_SEED must be a non-negative integer, got '") + env + "'");
    }
  }

  auto r = run_replay(script, config);
  if (!a.out.empty()) {
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    for (const auto& line : r.transcript) out << line << '\n';
    out.flush();
    if (!out) {
      std::cerr << "cannot write " << a.out << "\n";
      return kRuntime;
    }
  }
  std::cout << "outcome: " << (r.outcome.decided() ? r.outcome.winner_text() : "none");
  if (r.outcome.decided()) std::cout << " (" << r.outcome.reason << ")";
  std::cout << "\nticks: " << r.ticks << "\nhp: A " << r.hp[0] << ", B " << r.hp[1]
            << "\ntranscript: " << transcript_hash(r.transcript) << "\n";
  return 0;
}

struct LogsArgs {
  std::string log_dir = "logs";
  std::optional<std::string> session;
  std::optional<std::string> player;
  std::optional<std::int64_t> since;
  std::optional<std::int64_t> until;
  std::string format = "jsonl";
};

std::string iso_time(std::int64_t ms) {
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << (ms % 1000) << 'Z';
  return os.str();
}

int logs(const LogsArgs& a) {
  LogQuery q{a.session, a.player, a.since, a.until};
  auto records = read_logs(a.log_dir, q, [](const std::string& w) { std::cerr << "warning: skipped " << w << "\n"; });
  if (a.format == "jsonl") {
    for (const auto& r : records) std::cout << record_to_json(r).dump() << "\n";
    return 0;
  }
  std::vector<std::array<std::string, 5>> rows;
  rows.push_back({"session_id", "timestamp", "player_id", "command", "status"});
  for (const auto& r : records) rows.push_back({r.session_id, iso_time(r.timestamp_ms), r.player_id, r.command_text, r.status});
  std::array<std::size_t, 5> width{};
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < 5; ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < 5; ++i) {
      line += row[i];
      if (i < 4) line += std::string(width[i] - row[i].size() + 2, ' ');
    }
    std::cout << line << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natural-language command battles: server, headless replay, and log inspection"};
  app.require_subcommand(1);

  ServeArgs sa;
  auto* serve_cmd = app.add_subcommand("serve", "Run the game server");
  serve_cmd->add_option("--addr", sa.addr, "host:port to listen on")->capture_default_str();
  serve_cmd->add_option("--config", sa.config, "Battle config JSON (defaults built in)");
  serve_cmd->add_option("--log-dir", sa.log_dir, "Directory for the command log")->capture_default_str();
  serve_cmd->add_option("--exemplars", sa.exemplars, "Prompt exemplar JSON");
  serve_cmd->add_option("--web-root", sa.web_root, "Serve static files from this directory");
  serve_cmd->add_option("--tick-ms", sa.tick_ms, "Wall-clock milliseconds per tick (default: the config's tick_dt)");
  serve_cmd->add_option("--translator", sa.translator, "auto, mock or llm")
      ->check(CLI::IsMember({"auto", "mock", "llm"}))
      ->capture_default_str();

  ReplayArgs ra;
  auto* replay_cmd = app.add_subcommand("replay", "Run a scripted battle headless");
  replay_cmd->add_option("script", ra.script, "Replay script JSON")->required();
  replay_cmd->add_option("--out", ra.out, "Write the per-tick transcript here");
  replay_cmd->add_option("--config", ra.config, "Battle config JSON (defaults built in)");

  LogsArgs la;
  auto* logs_cmd = app.add_subcommand("logs", "Show command log records");
  logs_cmd->add_option("--log-dir", la.log_dir, "Directory holding the command log")->capture_default_str();
  logs_cmd->add_option("--session", la.session, "Only this session");
  logs_cmd->add_option("--player", la.player, "Only this player");
  logs_cmd->add_option("--since", la.since, "From this Unix time in ms (inclusive)");
  logs_cmd->add_option("--until", la.until, "Up to this Unix time in ms (inclusive)");
  logs_cmd->add_option("--format", la.format, "jsonl or table")
      ->check(CLI::IsMember({"jsonl", "table"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*serve_cmd) return serve(sa);
    if (*replay_cmd) return replay(ra);
    return logs(la);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
