#include "ctxinsert/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <optional>

namespace ctxinsert::logging {

namespace {

Level parse_level(const char* text) {
    if (text == nullptr) return Level::warn;
    std::string s(text);
    if (s == "debug") return Level::debug;
    if (s == "info") return Level::info;
    if (s == "warn") return Level::warn;
    if (s == "error") return Level::error;
    if (s == "off") return Level::off;
    return Level::warn;
}

std::optional<Level>& override_level() {
    static std::optional<Level> level;
    return level;
}

const char* level_name(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
        default: return "off";
    }
}

std::mutex& io_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

Level threshold() {
    if (override_level().has_value()) return *override_level();
    static Level env_level = parse_level(std::getenv("CONTEXT_INSERT_LOG"));
    return env_level;
}

void set_threshold(Level level) {
    override_level() = level;
}

void write(Level level, const std::string& message) {
    if (static_cast<int>(level) < static_cast<int>(threshold())) return;
    std::lock_guard<std::mutex> lock(io_mutex());
    std::fprintf(stderr, "[%s] %s\n", level_name(level), message.c_str());
}

}  // namespace ctxinsert::logging
