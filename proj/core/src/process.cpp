#include "noisebench/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "noisebench/errors.hpp"

extern char** environ;

namespace noisebench {
namespace {

constexpr std::size_t kStderrTailLimit = 8192;

void ignore_sigpipe_once() {
  // Writes to a dead peer must surface as EPIPE, not kill the driver.
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

int millis_until(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
  if (left.count() <= 0) return 0;
  return static_cast<int>(std::min<long long>(left.count(), 1 << 30));
}

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

int decode_status(int raw) {
  if (WIFEXITED(raw)) return WEXITSTATUS(raw);
  if (WIFSIGNALED(raw)) return -WTERMSIG(raw);
  return -1;
}

struct Pipe {
  int read = -1;
  int write = -1;
};

Pipe make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw ClassifierError(fmt::format("pipe2 failed: {}", std::strerror(errno)));
  }
  return {fds[0], fds[1]};
}

}  // namespace

std::unique_ptr<ChildProcess> ChildProcess::spawn_shell(const std::string& command) {
  return spawn({"/bin/sh", "-c", command});
}

std::unique_ptr<ChildProcess> ChildProcess::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ContractViolation("ChildProcess::spawn: empty argv");
  ignore_sigpipe_once();

  Pipe in = make_pipe();
  Pipe out = make_pipe();
  Pipe err = make_pipe();
  auto close_all = [&] {
    for (int fd : {in.read, in.write, out.read, out.write, err.read, err.write}) {
      if (fd >= 0) ::close(fd);
    }
  };

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in.read, STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out.write, STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err.write, STDERR_FILENO);

  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  sigset_t defaults;
  sigemptyset(&defaults);
  sigaddset(&defaults, SIGPIPE);
  posix_spawnattr_setsigdefault(&attr, &defaults);
  posix_spawnattr_setpgroup(&attr, 0);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP | POSIX_SPAWN_SETSIGDEF);

  std::vector<char*> args;
  args.reserve(argv.size() + 1);
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, args[0], &actions, &attr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    close_all();
    throw ClassifierError(fmt::format("failed to spawn '{}': {}", argv[0], std::strerror(rc)));
  }
  ::close(in.read);
  ::close(out.write);
  ::close(err.write);

  std::unique_ptr<ChildProcess> child(new ChildProcess());
  child->pid_ = pid;
  child->stdin_fd_ = in.write;
  child->stdout_fd_ = out.read;
  child->stderr_fd_ = err.read;
  set_nonblocking(child->stdin_fd_);
  set_nonblocking(child->stdout_fd_);
  set_nonblocking(child->stderr_fd_);
  return child;
}

ChildProcess::~ChildProcess() {
  if (pid_ > 0 && !status_) {
    kill_group();
    reap(true);
  }
  close_fd(stdin_fd_);
  close_fd(stdout_fd_);
  close_fd(stderr_fd_);
}

void ChildProcess::close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

void ChildProcess::kill_group() {
  if (pid_ > 0 && !status_) {
    ::kill(-pid_, SIGKILL);
    ::kill(pid_, SIGKILL);
  }
}

bool ChildProcess::reap(bool block) {
  if (status_) return true;
  int raw = 0;
  pid_t r;
  do {
    r = ::waitpid(pid_, &raw, block ? 0 : WNOHANG);
  } while (r < 0 && errno == EINTR);
  if (r == pid_) {
    status_ = decode_status(raw);
    return true;
  }
  return false;
}

void ChildProcess::drain_stderr_nonblocking() {
  if (stderr_fd_ < 0) return;
  char buf[4096];
  for (;;) {
    const ssize_t n = ::read(stderr_fd_, buf, sizeof buf);
    if (n > 0) {
      stderr_tail_.append(buf, static_cast<std::size_t>(n));
      if (stderr_tail_.size() > kStderrTailLimit) {
        stderr_tail_.erase(0, stderr_tail_.size() - kStderrTailLimit);
      }
      continue;
    }
    if (n == 0) close_fd(stderr_fd_);
    return;  // EAGAIN or error
  }
}

// Waits until stdout (or stdin, when writing) is ready, servicing stderr meanwhile.
void ChildProcess::pump(Clock::time_point deadline, bool want_write) {
  pollfd fds[2];
  int nfds = 0;
  if (want_write) {
    fds[nfds++] = {stdin_fd_, POLLOUT, 0};
  } else {
    fds[nfds++] = {stdout_fd_, POLLIN, 0};
  }
  if (stderr_fd_ >= 0) fds[nfds++] = {stderr_fd_, POLLIN, 0};

  const int rc = ::poll(fds, static_cast<nfds_t>(nfds), millis_until(deadline));
  if (rc < 0 && errno != EINTR) {
    throw ClassifierError(fmt::format("poll failed: {}", std::strerror(errno)));
  }
  if (nfds == 2 && (fds[1].revents & (POLLIN | POLLHUP))) drain_stderr_nonblocking();
}

void ChildProcess::send_line(std::string_view line, Clock::time_point deadline) {
  if (stdin_fd_ < 0) throw ClassifierError("classifier input stream already closed");
  std::string data(line);
  data.push_back('\n');
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::write(stdin_fd_, data.data() + sent, data.size() - sent);
    if (n > 0) {
      sent += static_cast<std::size_t>(n);
      continue;
    }
    if (n < 0 && errno == EPIPE) {
      throw ClassifierError("classifier closed its input stream");
    }
    if (n < 0 && errno != EAGAIN && errno != EINTR) {
      throw ClassifierError(fmt::format("write to classifier failed: {}", std::strerror(errno)));
    }
    if (Clock::now() >= deadline) throw ClassifierError("timed out writing to classifier");
    pump(deadline, true);
  }
}

std::optional<std::string> ChildProcess::receive_line(Clock::time_point deadline) {
  for (;;) {
    const auto nl = read_buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      return line;
    }
    if (stdout_eof_) {
      if (read_buffer_.empty()) return std::nullopt;
      std::string rest = std::move(read_buffer_);
      read_buffer_.clear();
      return rest;
    }
    char buf[65536];
    const ssize_t n = ::read(stdout_fd_, buf, sizeof buf);
    if (n > 0) {
      read_buffer_.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    if (n == 0) {
      stdout_eof_ = true;
      continue;
    }
    if (errno != EAGAIN && errno != EINTR) {
      throw ClassifierError(fmt::format("read from classifier failed: {}", std::strerror(errno)));
    }
    if (Clock::now() >= deadline) throw ClassifierError("timed out waiting for classifier output");
    pump(deadline, false);
  }
}

int ChildProcess::finish(Clock::time_point deadline) {
  close_fd(stdin_fd_);
  while (!reap(false)) {
    if (Clock::now() >= deadline) {
      kill_group();
      reap(true);
      break;
    }
    // Keep the child's output pipes flowing so it cannot block on a full pipe.
    char buf[4096];
    while (stdout_fd_ >= 0 && ::read(stdout_fd_, buf, sizeof buf) > 0) {
    }
    drain_stderr_nonblocking();
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  drain_stderr_nonblocking();
  return *status_;
}

std::optional<int> ChildProcess::exit_status() {
  reap(false);
  return status_;
}

std::string ChildProcess::diagnostics() const { return stderr_tail_; }

}  // namespace noisebench
