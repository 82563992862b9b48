#pragma once

// Streaming client for OpenAI-style /completions endpoints (server-sent
// events). Needs httplib; define CPPHTTPLIB_OPENSSL_SUPPORT before including
// to reach https:// endpoints.

#include <chrono>
#include <cstdlib>
#include <optional>
#include <stop_token>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cmdbattle/translator.hpp"

namespace cmdbattle {

struct EndpointConfig {
  std::string base_url;  // e.g. https://api.example.com/inference/v1
  std::string api_key;
  std::string model;
  double timeout_s = 30.0;
  int max_tokens = 256;

  // LLM_API_BASE_URL, LLM_API_KEY, LLM_MODEL, LLM_TIMEOUT_S. Returns nullopt
  // when the base URL is unset.
  static std::optional<EndpointConfig> from_env() {
    auto get = [](const char* name) -> std::string {
      const char* v = std::getenv(name);
      return v ? v : "";
    };
    EndpointConfig c;
    c.base_url = get("LLM_API_BASE_URL");
    if (c.base_url.empty()) return std::nullopt;
    c.api_key = get("LLM_API_KEY");
    c.model = get("LLM_MODEL");
    if (auto t = get("LLM_TIMEOUT_S"); !t.empty()) {
      auto v = parse_decimal(t);
      if (!v || *v <= 0) throw std::invalid_argument("LLM_TIMEOUT_S must be a positive number");
      c.timeout_s = *v;
    }
    return c;
  }
};

namespace http_detail {

// Splits "scheme://host[:port][/prefix]" into origin and path prefix.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  auto path_at = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_at == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_at);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_at), prefix};
}

// Text carried by one SSE data payload, or nullopt for [DONE].
inline std::optional<std::string> sse_text(std::string_view payload) {
  if (payload == "[DONE]") return std::nullopt;
  auto j = nlohmann::json::parse(payload, nullptr, false);
  if (j.is_discarded()) throw TranslateError(TranslateErrorCode::network_error, "malformed stream event");
  const auto& choices = j.value("choices", nlohmann::json::array());
  if (choices.empty()) return std::string();
  const auto& c = choices[0];
  if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
  if (c.contains("delta") && c["delta"].contains("content") && c["delta"]["content"].is_string()) {
    return c["delta"]["content"].get<std::string>();
  }
  return std::string();
}

}  // namespace http_detail

class HttpCompletionEndpoint : public CompletionEndpoint {
 public:
  explicit HttpCompletionEndpoint(EndpointConfig config) : config_(std::move(config)) {
    std::tie(origin_, prefix_) = http_detail::split_url(config_.base_url);
  }

  void stream(const StreamRequest& sreq, const std::function<bool(std::string_view)>& on_chunk) override {
    using namespace std::chrono;
    auto remaining = [&] { return duration_cast<microseconds>(sreq.deadline - Clock::now()); };
    if (remaining().count() <= 0) throw TranslateError(TranslateErrorCode::timeout, "timed out before request");

    httplib::Client cli(origin_);
    auto left = remaining();
    cli.set_connection_timeout(duration_cast<seconds>(left).count(), left.count() % 1000000);
    cli.set_read_timeout(duration_cast<seconds>(left).count(), left.count() % 1000000);
    std::stop_callback on_stop(sreq.stop, [&cli] { cli.stop(); });

    nlohmann::json body = {{"prompt", sreq.prompt}, {"max_tokens", sreq.max_tokens}, {"stream", true},
                           {"temperature", 0}, {"stop", {"\nCommand:"}}};
    if (!config_.model.empty()) body["model"] = config_.model;

    httplib::Request req;
    req.method = "POST";
    req.path = prefix_ + "/completions";
    req.headers = {{"Accept", "text/event-stream"}};
    if (!config_.api_key.empty()) req.headers.emplace("Authorization", "Bearer " + config_.api_key);
    req.body = body.dump();
    req.set_header("Content-Type", "application/json");

    int status = 0;
    std::string error_body;
    std::string pending;
    bool finished = false;
    bool cancelled = false;
    std::optional<TranslateError> failure;

    req.response_handler = [&](const httplib::Response& res) {
      status = res.status;
      return true;
    };
    req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
      if (status != 200) {
        error_body.append(data, len);
        return error_body.size() < 4096;
      }
      pending.append(data, len);
      std::size_t nl;
      while ((nl = pending.find('\n')) != std::string::npos) {
        std::string line = pending.substr(0, nl);
        pending.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind("data:", 0) != 0) continue;
        std::string_view payload(line);
        payload.remove_prefix(5);
        if (!payload.empty() && payload.front() == ' ') payload.remove_prefix(1);
        try {
          auto text = http_detail::sse_text(payload);
          if (!text) {
            finished = true;
            return false;
          }
          if (!text->empty() && !on_chunk(*text)) {
            cancelled = true;
            return false;
          }
        } catch (const TranslateError& e) {
          failure = e;
          return false;
        }
      }
      return true;
    };

    httplib::Response res;
    httplib::Error err = httplib::Error::Success;
    cli.send(req, res, err);
    if (failure) throw *failure;
    if (finished || cancelled) return;
    if (sreq.stop.stop_requested()) throw TranslateError(TranslateErrorCode::cancelled, "translation cancelled");
    if (err != httplib::Error::Success && err != httplib::Error::Canceled) {
      if (remaining().count() <= 0 || (err == httplib::Error::Read && remaining().count() <= 1000)) {
        throw TranslateError(TranslateErrorCode::timeout, "model endpoint timed out");
      }
      throw TranslateError(TranslateErrorCode::network_error, "model endpoint: " + httplib::to_string(err));
    }
    if (status != 200) {
      throw TranslateError(TranslateErrorCode::network_error,
                           "model endpoint returned HTTP " + std::to_string(status) + ": " + error_body.substr(0, 200));
    }
  }

 private:
  EndpointConfig config_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace cmdbattle
