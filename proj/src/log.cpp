#include "gamaudit/log.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>

namespace gamaudit::log {
namespace {

Level parse_env() {
  const char* env = std::getenv("GAM_AUDIT_LOG");
  if (env == nullptr) return Level::Warn;
  const std::string v(env);
  if (v == "error") return Level::Error;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

std::atomic<int>& level_slot() {
  static std::atomic<int> slot{static_cast<int>(parse_env())};
  return slot;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Level threshold() { return static_cast<Level>(level_slot().load(std::memory_order_relaxed)); }

void set_threshold(Level level) { level_slot().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  static constexpr const char* tags[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(sink_mutex());
  std::fprintf(stderr, "[gam-audit %s] %.*s\n", tags[static_cast<int>(level)],
               static_cast<int>(message.size()), message.data());
}

}  // namespace gamaudit::log
