#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hfl {

using TokenId = int32_t;

inline constexpr const char* version_string = "hfl 0.1";

// error type thrown by every module; the CLI maps it to exit code 1
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

} // namespace hfl
