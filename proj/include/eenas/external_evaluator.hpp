#pragma once

#include "eenas/evaluators.hpp"

#include <json.hpp>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace eenas {

/// Line protocol (newline-delimited JSON over the child's stdin/stdout):
///   request  {"id":int,"genotype":string,"epochs":int}
///   response {"id":int,"error":float,"params_m":float|null,"flops_m":float|null,"cost_units":float}
inline std::string encode_request(const EvaluationRequest& req)
{
  nlohmann::ordered_json j{{"id", req.id}, {"genotype", req.genotype}, {"epochs", req.epochs}};
  return j.dump();
}

/// Parses and validates one response line against its request.
inline EvaluationResult decode_response(const std::string& line, const EvaluationRequest& req)
{
  EvaluationResult r;
  try
  {
    const auto j = nlohmann::json::parse(line);
    r.id = j.at("id").get<std::uint64_t>();
    r.error = j.at("error").get<double>();
    r.cost_units = j.at("cost_units").get<double>();
    if (j.contains("params_m") && !j["params_m"].is_null())
      r.params_m = j["params_m"].get<double>();
    if (j.contains("flops_m") && !j["flops_m"].is_null())
      r.flops_m = j["flops_m"].get<double>();
  }
  catch (const nlohmann::json::exception& ex)
  {
    throw EvaluatorError(EvaluatorError::Kind::malformed_response,
                         std::string("malformed evaluator response (") + ex.what() + ")", line);
  }
  check_result(r, req, line);
  return r;
}

/// Child process running `/bin/sh -c command`, connected through a socket
/// pair bound to its stdin and stdout.
class ChildProcess
{
public:
  explicit ChildProcess(const std::string& command)
  {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
      throw EvaluatorError(EvaluatorError::Kind::spawn_failed,
                           std::string("socketpair failed: ") + std::strerror(errno), command);
    pid_ = ::fork();
    if (pid_ < 0)
    {
      ::close(fds[0]);
      ::close(fds[1]);
      throw EvaluatorError(EvaluatorError::Kind::spawn_failed,
                           std::string("fork failed: ") + std::strerror(errno), command);
    }
    if (pid_ == 0)
    {
      // only async-signal-safe calls past this point
      ::setpgid(0, 0);
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::setpgid(pid_, pid_);
    pgid_ = pid_;
    ::close(fds[1]);
    fd_ = fds[0];
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() { terminate(); }

  void send_line(const std::string& line)
  {
    const std::string data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size())
    {
      const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0)
      {
        if (errno == EINTR)
          continue;
        reap_and_throw("evaluator process closed its input");
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  /// Reads one line or throws on timeout / end of stream.
  std::string read_line(std::chrono::milliseconds timeout)
  {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;)
    {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos)
      {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0)
        throw EvaluatorError(EvaluatorError::Kind::timeout,
                             "evaluator timed out after " + std::to_string(timeout.count()) + " ms",
                             buffer_);
      pollfd p{fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, static_cast<int>(left.count()));
      if (ready < 0 && errno != EINTR)
        throw EvaluatorError(EvaluatorError::Kind::io,
                             std::string("poll failed: ") + std::strerror(errno));
      if (ready <= 0)
        continue;
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR)
        continue;
      if (n <= 0)
        reap_and_throw("evaluator process closed its output");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  /// Closes the channel, gives the child a short grace period, then kills
  /// whatever is left of its process group.
  void terminate() noexcept
  {
    if (fd_ >= 0)
    {
      ::close(fd_);
      fd_ = -1;
    }
    for (int i = 0; i < 50 && pid_ > 0; ++i)
    {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_)
        pid_ = -1;
      else
        ::usleep(2000);
    }
    if (pgid_ > 0)
      ::kill(-pgid_, SIGKILL);
    if (pid_ > 0)
      ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
    pgid_ = -1;
  }

private:
  [[noreturn]] void reap_and_throw(const std::string& what)
  {
    int status = 0;
    std::string detail = buffer_;
    if (pid_ > 0 && ::waitpid(pid_, &status, 0) == pid_)
    {
      pid_ = -1;
      if (WIFEXITED(status))
        detail = "exit code " + std::to_string(WEXITSTATUS(status)) +
                 (buffer_.empty() ? "" : ", partial output '" + buffer_ + "'");
      else if (WIFSIGNALED(status))
        detail = "killed by signal " + std::to_string(WTERMSIG(status));
    }
    throw EvaluatorError(EvaluatorError::Kind::process_exit, what, detail);
  }

  pid_t pid_ = -1;
  pid_t pgid_ = -1; // the shell and anything it spawns
  int fd_ = -1;
  std::string buffer_;
};

/// One request/response exchange with an already running child.
inline EvaluationResult exchange(ChildProcess& child, const EvaluationRequest& req,
                                 std::chrono::milliseconds timeout)
{
  child.send_line(encode_request(req));
  return decode_response(child.read_line(timeout), req);
}

/// Runs the command for a single request.
inline EvaluationResult evaluate_external(const std::string& command, const EvaluationRequest& req,
                                          std::chrono::milliseconds timeout)
{
  ChildProcess child(command);
  return exchange(child, req, timeout);
}

/// Evaluator backed by a pool of long-lived worker processes, one request in
/// flight per process. A process that fails an exchange is discarded.
class ExternalEvaluator final : public Evaluator
{
public:
  ExternalEvaluator(std::string command, std::chrono::milliseconds timeout,
                    std::size_t max_processes = 1)
    : command_(std::move(command))
    , timeout_(timeout)
    , max_processes_(std::max<std::size_t>(1, max_processes))
  {
  }

  EvaluationResult evaluate(const EvaluationRequest& req) override
  {
    std::unique_ptr<ChildProcess> child = acquire();
    try
    {
      EvaluationResult r = exchange(*child, req, timeout_);
      release(std::move(child));
      return r;
    }
    catch (...)
    {
      child.reset();
      std::lock_guard lock(mutex_);
      --live_;
      available_.notify_one();
      throw;
    }
  }

private:
  std::unique_ptr<ChildProcess> acquire()
  {
    std::unique_lock lock(mutex_);
    available_.wait(lock, [&] { return !idle_.empty() || live_ < max_processes_; });
    if (!idle_.empty())
    {
      auto child = std::move(idle_.back());
      idle_.pop_back();
      return child;
    }
    ++live_;
    lock.unlock();
    try
    {
      return std::make_unique<ChildProcess>(command_);
    }
    catch (...)
    {
      std::lock_guard relock(mutex_);
      --live_;
      available_.notify_one();
      throw;
    }
  }

  void release(std::unique_ptr<ChildProcess> child)
  {
    std::lock_guard lock(mutex_);
    idle_.push_back(std::move(child));
    available_.notify_one();
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::size_t max_processes_;
  std::mutex mutex_;
  std::condition_variable available_;
  std::vector<std::unique_ptr<ChildProcess>> idle_;
  std::size_t live_ = 0;
};

} // namespace eenas
