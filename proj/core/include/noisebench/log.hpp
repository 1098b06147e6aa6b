#pragma once

#include <string_view>

namespace noisebench {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3 };

/// Messages below the threshold are dropped. Default: Info.
void set_log_threshold(LogLevel level) noexcept;
LogLevel log_threshold() noexcept;

/// Thread-safe line output to stderr.
void log_message(LogLevel level, std::string_view message);

}  // namespace noisebench
