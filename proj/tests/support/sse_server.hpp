#pragma once

// Local completion server for tests: streams a fixed list of tokens as
// server-sent events, one per `interval`, and counts what it managed to send.

#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace cmdbattle::testing {

class SseServer {
 public:
  SseServer(std::vector<std::string> tokens, std::chrono::milliseconds interval)
      : tokens_(std::move(tokens)), interval_(interval) {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      last_body_ = req.body;
      auto authorization = req.get_header_value("Authorization");
      last_auth_ = authorization;
      if (status_ != 200) {
        res.status = status_;
        res.set_content("{\"error\":\"nope\"}", "application/json");
        return;
      }
      served_ = 0;
      disconnected_ = false;
      res.set_chunked_content_provider("text/event-stream", [this](size_t, httplib::DataSink& sink) {
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
          std::this_thread::sleep_for(interval_);
          nlohmann::json ev = {{"choices", {{{"text", tokens_[i]}, {"index", 0}}}}};
          std::string frame = "data: " + ev.dump() + "\n\n";
          if (!sink.is_writable() || !sink.write(frame.data(), frame.size())) {
            disconnected_ = true;
            return false;
          }
          ++served_;
        }
        std::string done = "data: [DONE]\n\n";
        sink.write(done.data(), done.size());
        sink.done();
        return true;
      });
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~SseServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  void fail_with(int status) { status_ = status; }
  int requests() const { return requests_; }
  std::size_t served() const { return served_; }
  bool disconnected() const { return disconnected_; }
  const std::string& last_body() const { return last_body_; }
  const std::string& last_auth() const { return last_auth_; }

 private:
  std::vector<std::string> tokens_;
  std::chrono::milliseconds interval_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> status_{200};
  std::atomic<int> requests_{0};
  std::atomic<std::size_t> served_{0};
  std::atomic<bool> disconnected_{false};
  std::string last_body_;
  std::string last_auth_;
};

// Splits text into n roughly equal tokens.
inline std::vector<std::string> split_tokens(const std::string& text, std::size_t n) {
  std::vector<std::string> out;
  std::size_t at = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t end = text.size() * (i + 1) / n;
    out.push_back(text.substr(at, end - at));
    at = end;
  }
  return out;
}

}  // namespace cmdbattle::testing
