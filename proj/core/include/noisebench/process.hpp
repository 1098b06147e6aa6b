#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace noisebench {

using Clock = std::chrono::steady_clock;

/// Newline-delimited duplex byte stream to a peer. Session code only sees
/// this interface, so peers can be child processes or in-process fakes.
class LineTransport {
 public:
  virtual ~LineTransport() = default;

  /// Writes `line` plus '\n'. Throws ClassifierError on timeout or a closed peer.
  virtual void send_line(std::string_view line, Clock::time_point deadline) = 0;
  /// Next line without its '\n', or nullopt at end of stream. Throws
  /// ClassifierError on timeout.
  virtual std::optional<std::string> receive_line(Clock::time_point deadline) = 0;
  /// Closes our write side and waits for the peer to finish, forcing it down
  /// once `deadline` passes. Returns the exit status (negative signal number if
  /// killed). Idempotent.
  virtual int finish(Clock::time_point deadline) = 0;
  /// Exit status if the peer already terminated.
  virtual std::optional<int> exit_status() = 0;
  /// Recent diagnostic output from the peer (stderr tail for processes).
  virtual std::string diagnostics() const = 0;
};

/// Child process running `/bin/sh -c command` with stdin/stdout/stderr
/// attached to pipes. The child gets its own process group so forced
/// termination also reaches its descendants.
class ChildProcess final : public LineTransport {
 public:
  static std::unique_ptr<ChildProcess> spawn_shell(const std::string& command);
  static std::unique_ptr<ChildProcess> spawn(const std::vector<std::string>& argv);
  ~ChildProcess() override;

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  void send_line(std::string_view line, Clock::time_point deadline) override;
  std::optional<std::string> receive_line(Clock::time_point deadline) override;
  int finish(Clock::time_point deadline) override;
  std::optional<int> exit_status() override;
  std::string diagnostics() const override;

  int pid() const noexcept { return pid_; }

 private:
  ChildProcess() = default;
  void pump(Clock::time_point deadline, bool want_write);
  void drain_stderr_nonblocking();
  void close_fd(int& fd);
  void kill_group();
  bool reap(bool block);

  int pid_ = -1;
  int stdin_fd_ = -1;
  int stdout_fd_ = -1;
  int stderr_fd_ = -1;
  std::string read_buffer_;
  std::string stderr_tail_;
  bool stdout_eof_ = false;
  std::optional<int> status_;
};

}  // namespace noisebench
