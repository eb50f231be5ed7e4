#pragma once

#include <string>

namespace ctxinsert::logging {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// Threshold parsed once from the CONTEXT_INSERT_LOG environment variable
// ("debug", "info", "warn", "error", "off"); defaults to warn.
Level threshold();

// Overrides the environment-derived threshold (used by tests and --verbose).
void set_threshold(Level level);

void write(Level level, const std::string& message);

inline void debug(const std::string& m) { write(Level::debug, m); }
inline void info(const std::string& m) { write(Level::info, m); }
inline void warn(const std::string& m) { write(Level::warn, m); }
inline void error(const std::string& m) { write(Level::error, m); }

}  // namespace ctxinsert::logging
