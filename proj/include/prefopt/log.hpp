#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace prefopt::log {

enum class Level { error = 0, info = 1, debug = 2 };

/// Level from PREFOPT_LOG (error|info|debug); info when unset.
inline Level threshold() {
    static const Level level = [] {
        const char* env = std::getenv("PREFOPT_LOG");
        if (env == nullptr) return Level::info;
        if (std::strcmp(env, "error") == 0) return Level::error;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        return Level::info;
    }();
    return level;
}

template <typename... Args>
void emit(Level level, const char* fmt, Args... args) {
    if (level > threshold()) return;
    const char* tag = level == Level::error ? "error" : level == Level::info ? "info" : "debug";
    std::fprintf(stderr, "[%s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
}

template <typename... Args>
void error(const char* fmt, Args... args) {
    emit(Level::error, fmt, args...);
}
template <typename... Args>
void info(const char* fmt, Args... args) {
    emit(Level::info, fmt, args...);
}
template <typename... Args>
void debug(const char* fmt, Args... args) {
    emit(Level::debug, fmt, args...);
}

}  // namespace prefopt::log
