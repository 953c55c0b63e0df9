#include "pboost/log.hpp"

#include <iostream>
#include <mutex>

namespace pboost::log {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

Sink& current_sink() {
  static Sink sink = [](Level level, std::string_view module, std::string_view message) {
    if (level == Level::warning) {
      std::cerr << "warning: [" << module << "] " << message << '\n';
    }
  };
  return sink;
}

void emit(Level level, std::string_view module, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (current_sink()) current_sink()(level, module, message);
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  std::swap(current_sink(), sink);
  return sink;
}

void info(std::string_view module, std::string_view message) {
  emit(Level::info, module, message);
}

void warn(std::string_view module, std::string_view message) {
  emit(Level::warning, module, message);
}

}  // namespace pboost::log
