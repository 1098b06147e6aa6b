#include "noisebench/log.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>

namespace noisebench {
namespace {

std::atomic<LogLevel> g_threshold{LogLevel::Info};
std::mutex g_mutex;

const char* tag(LogLevel level) {
  switch (level) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
  }
  return "?";
}

}  // namespace

void set_log_threshold(LogLevel level) noexcept { g_threshold.store(level); }
LogLevel log_threshold() noexcept { return g_threshold.load(); }

void log_message(LogLevel level, std::string_view message) {
  if (level < g_threshold.load()) return;
  std::lock_guard lock(g_mutex);
  std::fprintf(stderr, "[noisebench %s] %.*s\n", tag(level), static_cast<int>(message.size()),
               message.data());
}

}  // namespace noisebench
