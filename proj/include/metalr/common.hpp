// SPDX-License-Identifier: Apache-2.0
//
// Shared error helpers. Contract violations throw std::invalid_argument,
// runtime failures (divergence, I/O, stale state) throw std::runtime_error.
#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace metalr {

namespace detail {
inline void format_into(std::ostringstream&) {}

template <class T, class... Rest>
void format_into(std::ostringstream& os, const T& head, const Rest&... rest) {
    os << head;
    format_into(os, rest...);
}
}  // namespace detail

template <class... Args>
std::string msg(const Args&... args) {
    std::ostringstream os;
    os.precision(17);
    detail::format_into(os, args...);
    return os.str();
}

template <class... Args>
[[noreturn]] void fail(const Args&... args) {
    throw std::runtime_error(msg(args...));
}

// Non-finite numbers produced by an otherwise well-formed computation. Kept
// distinct so callers exploring unstable configurations (the grid oracle) can
// score them as infinitely bad without masking genuine usage errors.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

template <class... Args>
void check_not_diverged(bool ok, const Args&... args) {
    if (!ok) throw DivergenceError(msg(args...));
}

template <class... Args>
[[noreturn]] void fail_arg(const Args&... args) {
    throw std::invalid_argument(msg(args...));
}

// Precondition / argument checks. Message pieces are only formatted on failure.
template <class... Args>
void check(bool ok, const Args&... args) {
    if (!ok) fail_arg(args...);
}

// State checks (stale caches, divergence, exhausted resources).
template <class... Args>
void check_state(bool ok, const Args&... args) {
    if (!ok) fail(args...);
}

}  // namespace metalr
