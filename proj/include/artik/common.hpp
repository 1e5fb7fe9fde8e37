#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace artik {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Error hierarchy. Every throwing operation uses one of these so callers can
// distinguish user mistakes (bad config, bad file) from contract violations.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class RangeError : public Error {
public:
    using Error::Error;
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

// Signed distance asked of a mesh that is not watertight.
class SignUndefinedError : public Error {
public:
    using Error::Error;
};

// Metric asked of a single-class label set.
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

// Anomaly injection produced invalid geometry; caller may resample the spec.
class RetryableError : public Error {
public:
    using Error::Error;
};

class TrainingDivergedError : public Error {
public:
    TrainingDivergedError(const std::string& msg, std::string checkpoint)
        : Error(msg), last_checkpoint(std::move(checkpoint)) {}
    std::string last_checkpoint;  // last good checkpoint path, may be empty
};

// ---------------------------------------------------------------------------
// Logging. Level comes from ARTIK_LOG in {error, info, debug}; default info.
// ---------------------------------------------------------------------------

enum class LogLevel : int { kError = 0, kInfo = 1, kDebug = 2 };

inline LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("ARTIK_LOG");
        if (!env) return LogLevel::kInfo;
        std::string v(env);
        if (v == "error") return LogLevel::kError;
        if (v == "debug") return LogLevel::kDebug;
        return LogLevel::kInfo;
    }();
    return level;
}

template <typename... Args>
void log_at(LogLevel lvl, const char* fmt, Args... args) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    const char* tag = lvl == LogLevel::kError ? "error" : lvl == LogLevel::kInfo ? "info" : "debug";
    std::fprintf(stderr, "[artik:%s] ", tag);
    if constexpr (sizeof...(Args) == 0) {
        std::fputs(fmt, stderr);
    } else {
        std::fprintf(stderr, fmt, args...);
    }
    std::fputc('\n', stderr);
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
    log_at(LogLevel::kInfo, fmt, args...);
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
    log_at(LogLevel::kDebug, fmt, args...);
}

template <typename... Args>
void log_error(const char* fmt, Args... args) {
    log_at(LogLevel::kError, fmt, args...);
}

}  // namespace artik
