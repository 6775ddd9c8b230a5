#pragma once

#include <cstdio>
#include <functional>
#include <string>

namespace evflex {

enum class LogLevel { debug, info, warn, error };

using LogSink = std::function<void(LogLevel, const std::string&)>;

inline LogSink& log_sink() {
    static LogSink sink = [](LogLevel level, const std::string& msg) {
        static const char* names[] = {"debug", "info", "warn", "error"};
        if (level == LogLevel::debug) return;
        std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], msg.c_str());
    };
    return sink;
}

inline void log(LogLevel level, const std::string& msg) {
    if (log_sink()) log_sink()(level, msg);
}

}
