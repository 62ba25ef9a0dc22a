#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace haml {

// Raised for malformed input documents (bad syntax, missing fields, unknown schema).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a structurally well-formed object violates a model invariant.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Raised for inconsistent run configuration; messages name the offending field.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a computation cannot proceed (non-finite objective, guard exceeded).
struct RuntimeFailure : std::runtime_error {
  explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

// Verbosity is controlled by the HAML_LOG environment variable: quiet|info|debug.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("HAML_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string v(env);
    if (v == "quiet") return LogLevel::quiet;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
  }();
  return level;
}

}  // namespace haml
