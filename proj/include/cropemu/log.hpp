#pragma once

#include <functional>
#include <string>

namespace cropemu {

enum class LogLevel { Info, Warning };

// Messages go to std::clog unless a sink is installed. The CLI installs one
// that honours --quiet; tests install one to capture warnings.
using LogSink = std::function<void(LogLevel, const std::string&)>;
void set_log_sink(LogSink sink);
void log_message(LogLevel level, const std::string& message);

inline void log_info(const std::string& message) { log_message(LogLevel::Info, message); }
inline void log_warning(const std::string& message) { log_message(LogLevel::Warning, message); }

}  // namespace cropemu
