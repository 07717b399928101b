#pragma once

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace vqi2i {

// All recoverable failures surface as this type; the CLI turns it into a
// single-line "vqi2i: error: ..." message and a nonzero exit code.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

[[noreturn]] [[gnu::format(printf, 1, 2)]] inline void failf(const char* fmt, ...) {
    char buf[512];
    std::va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    throw Error(buf);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

}  // namespace vqi2i
