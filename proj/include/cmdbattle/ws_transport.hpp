#pragma once

// WebSocket front end for the Hub. Serves:
//   GET /ws       upgrade to a WebSocket, one JSON message per text frame
//   GET /healthz  "ok"
//   GET /...      files under the optional web root

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "cmdbattle/server.hpp"

namespace cmdbattle {

namespace ws_detail {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

inline std::string mime_type(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

class WsLink : public ClientLink, public std::enable_shared_from_this<WsLink> {
 public:
  WsLink(tcp::socket socket, Hub& hub) : ws_(std::move(socket)), hub_(hub) {}

  void start(http::request<http::string_body> upgrade) {
    std::optional<std::string> bearer;
    auto auth = upgrade[http::field::authorization];
    if (auth.starts_with("Bearer ")) bearer = std::string(auth.substr(7));
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(upgrade, [self = shared_from_this(), bearer](beast::error_code ec) {
      if (ec) return;
      self->hub_.on_open(self, bearer);
      self->opened_ = true;
      self->read();
    });
  }

  void send(std::string text) override {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      if (self->closing_) return;
      self->queue_.push_back(std::move(text));
      if (self->queue_.size() == 1) self->write();
    });
  }

  void close() override {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closing_) return;
      self->closing_ = true;
      if (self->queue_.empty()) self->do_close();
    });
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->gone();
        return;
      }
      std::string frame = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->hub_.on_message(self, frame);
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->queue_.clear();
        self->gone();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) {
        self->write();
      } else if (self->closing_) {
        self->do_close();
      }
    });
  }

  void do_close() {
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  void gone() {
    if (opened_ && !reported_) {
      reported_ = true;
      hub_.on_close(shared_from_this());
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  Hub& hub_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool closing_ = false;
  bool opened_ = false;
  bool reported_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, Hub& hub, std::optional<std::filesystem::path> web_root)
      : stream_(std::move(socket)), hub_(hub), web_root_(std::move(web_root)) {}

  void start() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (!ec) self->handle();
    });
  }

 private:
  void handle() {
    std::string target(req_.target());
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    if (websocket::is_upgrade(req_)) {
      if (target != "/ws") return reply(http::status::not_found, "not found\n", "text/plain");
      stream_.expires_never();
      std::make_shared<WsLink>(stream_.release_socket(), hub_)->start(std::move(req_));
      return;
    }
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      return reply(http::status::method_not_allowed, "method not allowed\n", "text/plain");
    }
    if (target == "/healthz") return reply(http::status::ok, "ok\n", "text/plain");
    if (web_root_) {
      if (target == "/") target = "/index.html";
      if (target.find("..") == std::string::npos) {
        auto path = *web_root_ / target.substr(1);
        std::ifstream in(path, std::ios::binary);
        if (in && std::filesystem::is_regular_file(path)) {
          std::string body((std::istreambuf_iterator<char>(in)), {});
          return reply(http::status::ok, std::move(body), mime_type(path));
        }
      }
    }
    reply(http::status::not_found, "not found\n", "text/plain");
  }

  void reply(http::status status, std::string body, const std::string& type) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, type);
    res->keep_alive(false);
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  Hub& hub_;
  std::optional<std::filesystem::path> web_root_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace ws_detail

class WsServer {
 public:
  // Binds immediately; port 0 picks a free port.
  WsServer(Hub& hub, const std::string& address, unsigned short port,
           std::optional<std::filesystem::path> web_root = std::nullopt)
      : hub_(hub), acceptor_(ioc_), web_root_(std::move(web_root)) {
    using ws_detail::tcp;
    tcp::endpoint ep(boost::asio::ip::make_address(address), port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(boost::asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  ~WsServer() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  boost::asio::io_context& context() { return ioc_; }

  // Serves on `threads` background threads.
  void start(unsigned threads = 2) {
    accept();
    for (unsigned i = 0; i < threads; ++i) threads_.emplace_back([this] { ioc_.run(); });
  }

  // Stops accepting, gives open connections `grace` to finish, then stops.
  void stop(std::chrono::milliseconds grace = std::chrono::milliseconds(0)) {
    if (stopped_.exchange(true)) return;
    boost::asio::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
    });
    if (grace.count() > 0) std::this_thread::sleep_for(grace);
    ioc_.stop();
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
  }

 private:
  void accept() {
    acceptor_.async_accept(boost::asio::make_strand(ioc_), [this](boost::system::error_code ec,
                                                                   ws_detail::tcp::socket socket) {
      if (ec) return;
      std::make_shared<ws_detail::HttpSession>(std::move(socket), hub_, web_root_)->start();
      accept();
    });
  }

  Hub& hub_;
  boost::asio::io_context ioc_;
  ws_detail::tcp::acceptor acceptor_;
  std::optional<std::filesystem::path> web_root_;
  std::vector<std::thread> threads_;
  std::atomic<bool> stopped_{false};
};

}  // namespace cmdbattle
