#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

namespace cmdbattle {

struct LogRecord {
  std::string session_id;
  std::int64_t timestamp_ms = 0;
  std::string player_id;
  std::string command_text;
  std::optional<nlohmann::ordered_json> branch_json;  // absent when rejected
  std::int64_t latency_ms = 0;
  std::string status;      // "applied" or "rejected"
  std::string error_code;  // rejected only

  bool operator==(const LogRecord&) const = default;
};

inline nlohmann::ordered_json record_to_json(const LogRecord& r) {
  nlohmann::ordered_json j;
  j["session_id"] = r.session_id;
  j["timestamp_ms"] = r.timestamp_ms;
  j["player_id"] = r.player_id;
  j["command_text"] = r.command_text;
  if (r.branch_json) j["branch_json"] = *r.branch_json;
  j["latency_ms"] = r.latency_ms;
  j["status"] = r.status;
  if (!r.error_code.empty()) j["error_code"] = r.error_code;
  return j;
}

// Throws std::invalid_argument naming the first bad field.
inline LogRecord record_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  auto str = [&j](const char* k) {
    if (!j.contains(k) || !j[k].is_string()) throw std::invalid_argument(std::string("bad or missing ") + k);
    return j[k].get<std::string>();
  };
  auto num = [&j](const char* k) {
    if (!j.contains(k) || !j[k].is_number_integer()) throw std::invalid_argument(std::string("bad or missing ") + k);
    return j[k].get<std::int64_t>();
  };
  LogRecord r;
  r.session_id = str("session_id");
  r.timestamp_ms = num("timestamp_ms");
  r.player_id = str("player_id");
  r.command_text = str("command_text");
  r.latency_ms = num("latency_ms");
  r.status = str("status");
  if (r.status != "applied" && r.status != "rejected") throw std::invalid_argument("bad status");
  if (j.contains("branch_json")) r.branch_json = j["branch_json"];
  if (j.contains("error_code")) r.error_code = str("error_code");
  return r;
}

// Where command records go. Appends must be durable before returning and
// throw on failure.
class LogSink {
 public:
  virtual ~LogSink() = default;
  virtual void append(const LogRecord& record) = 0;
};

inline constexpr const char* kLogFileName = "command_log.jsonl";

// Append-only JSON Lines file. Every record is a single write() of one
// complete line followed by fdatasync, so a crash leaves at most a partial
// last line, which is cut off the next time the file is opened.
class FileLogStore : public LogSink {
 public:
  explicit FileLogStore(const std::filesystem::path& dir) : path_(dir / kLogFileName) {
    std::filesystem::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "open " + path_.string());
    drop_torn_tail();
  }
  FileLogStore(const FileLogStore&) = delete;
  FileLogStore& operator=(const FileLogStore&) = delete;
  ~FileLogStore() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void append(const LogRecord& record) override {
    std::string line = record_to_json(record).dump() + "\n";
    std::lock_guard lock(mu_);
    const char* p = line.data();
    std::size_t left = line.size();
    while (left > 0) {
      ssize_t n = ::write(fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw std::system_error(errno, std::generic_category(), "append " + path_.string());
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd_) != 0) throw std::system_error(errno, std::generic_category(), "fdatasync");
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  void drop_torn_tail() {
    struct stat st {};
    if (::fstat(fd_, &st) != 0 || st.st_size == 0) return;
    off_t end = st.st_size;
    char c = 0;
    if (::pread(fd_, &c, 1, end - 1) == 1 && c == '\n') return;
    // Scan back for the last complete line.
    off_t keep = 0;
    char buf[4096];
    for (off_t pos = end; pos > 0 && keep == 0;) {
      off_t start = std::max<off_t>(0, pos - static_cast<off_t>(sizeof buf));
      ssize_t n = ::pread(fd_, buf, static_cast<std::size_t>(pos - start), start);
      if (n <= 0) break;
      for (ssize_t i = n - 1; i >= 0; --i) {
        if (buf[i] == '\n') {
          keep = start + i + 1;
          break;
        }
      }
      pos = start;
    }
    if (::ftruncate(fd_, keep) != 0) throw std::system_error(errno, std::generic_category(), "truncate torn log");
    ::fdatasync(fd_);
  }

  std::filesystem::path path_;
  int fd_ = -1;
  std::mutex mu_;
};

struct LogQuery {
  std::optional<std::string> session_id;
  std::optional<std::string> player_id;
  std::optional<std::int64_t> since_ms;  // inclusive
  std::optional<std::int64_t> until_ms;  // inclusive
};

// Records matching `q` in timestamp order (file order among equal
// timestamps). Unreadable lines are reported through `warn` and skipped.
inline std::vector<LogRecord> read_logs(const std::filesystem::path& dir, const LogQuery& q = {},
                                        const std::function<void(const std::string&)>& warn = {}) {
  std::vector<LogRecord> out;
  std::ifstream in(dir / kLogFileName);
  if (!in) return out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    LogRecord r;
    try {
      r = record_from_json(nlohmann::ordered_json::parse(line));
    } catch (const std::exception& e) {
      if (warn) warn("line " + std::to_string(line_no) + ": " + e.what());
      continue;
    }
    if (q.session_id && r.session_id != *q.session_id) continue;
    if (q.player_id && r.player_id != *q.player_id) continue;
    if (q.since_ms && r.timestamp_ms < *q.since_ms) continue;
    if (q.until_ms && r.timestamp_ms > *q.until_ms) continue;
    out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LogRecord& a, const LogRecord& b) { return a.timestamp_ms < b.timestamp_ms; });
  return out;
}

}  // namespace cmdbattle
