#pragma once

// Runs a child process with captured stdout/stderr.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmdbattle::testing {

class Process {
 public:
  Process(const Process&) = delete;
  Process& operator=(const Process&) = delete;

  // `env` entries are NAME=value pairs added to the current environment.
  explicit Process(std::vector<std::string> argv, std::vector<std::string> env = {}) {
    int out[2], err[2];
    if (::pipe2(out, O_CLOEXEC) != 0 || ::pipe2(err, O_CLOEXEC) != 0) throw std::runtime_error("pipe");
    pid_ = ::fork();
    if (pid_ < 0) throw std::runtime_error("fork");
    if (pid_ == 0) {
      ::dup2(out[1], 1);
      ::dup2(err[1], 2);
      for (auto& e : env) ::putenv(e.data());
      std::vector<char*> args;
      for (auto& a : argv) args.push_back(a.data());
      args.push_back(nullptr);
      ::execv(args[0], args.data());
      ::_exit(127);
    }
    ::close(out[1]);
    ::close(err[1]);
    out_fd_ = out[0];
    err_fd_ = err[0];
  }

  ~Process() {
    if (pid_ > 0 && !exited_) {
      ::kill(pid_, SIGKILL);
      wait();
    }
    ::close(out_fd_);
    ::close(err_fd_);
  }

  // Reads stdout until `needle` shows up or the timeout passes.
  bool wait_for_output(const std::string& needle, std::chrono::milliseconds timeout) {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    while (out_.find(needle) == std::string::npos) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return false;
      pollfd p{out_fd_, POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) continue;
      if (!read_some(out_fd_, out_)) return out_.find(needle) != std::string::npos;
    }
    return true;
  }

  void signal(int sig) { ::kill(pid_, sig); }

  // Waits for exit, draining both pipes; returns the exit code (or 128+signal).
  int wait() {
    if (exited_) return code_;
    bool out_open = true, err_open = true;
    while (out_open || err_open) {
      pollfd p[2] = {{out_open ? out_fd_ : -1, POLLIN, 0}, {err_open ? err_fd_ : -1, POLLIN, 0}};
      if (::poll(p, 2, -1) < 0) break;
      if (out_open && p[0].revents) out_open = read_some(out_fd_, out_);
      if (err_open && p[1].revents) err_open = read_some(err_fd_, err_);
    }
    int status = 0;
    ::waitpid(pid_, &status, 0);
    exited_ = true;
    code_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    return code_;
  }

  const std::string& out() const { return out_; }
  const std::string& err() const { return err_; }

 private:
  static bool read_some(int fd, std::string& into) {
    char buf[4096];
    ssize_t n = ::read(fd, buf, sizeof buf);
    if (n <= 0) return false;
    into.append(buf, static_cast<std::size_t>(n));
    return true;
  }

  pid_t pid_ = -1;
  int out_fd_ = -1;
  int err_fd_ = -1;
  std::string out_;
  std::string err_;
  bool exited_ = false;
  int code_ = 0;
};

struct Finished {
  int code;
  std::string out;
  std::string err;
};

// Runs to completion.
inline Finished run(std::vector<std::string> argv, std::vector<std::string> env = {}) {
  Process p(std::move(argv), std::move(env));
  int code = p.wait();
  return {code, p.out(), p.err()};
}

}  // namespace cmdbattle::testing
