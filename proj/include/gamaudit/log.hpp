#pragma once

#include <string_view>

#include <fmt/format.h>

namespace gamaudit::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Threshold is read once from GAM_AUDIT_LOG (error|warn|info|debug), default warn.
Level threshold();
void set_threshold(Level level);
void write(Level level, std::string_view message);

template <typename... Args>
void warn(fmt::format_string<Args...> f, Args&&... args) {
  if (threshold() >= Level::Warn) write(Level::Warn, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void info(fmt::format_string<Args...> f, Args&&... args) {
  if (threshold() >= Level::Info) write(Level::Info, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void debug(fmt::format_string<Args...> f, Args&&... args) {
  if (threshold() >= Level::Debug) write(Level::Debug, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace gamaudit::log
