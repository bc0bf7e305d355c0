#pragma once

#include <numbers>

namespace zeno {

// Everything inside the library is an angular frequency (rad/s) or a time in
// seconds. Ordinary frequencies only appear at the I/O boundary.
inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double hz(double nu) { return two_pi * nu; }
constexpr double to_hz(double omega) { return omega / two_pi; }

// Sweep rates are quoted in Hz/ms.
constexpr double hz_per_ms(double rate) { return two_pi * rate * 1e3; }
constexpr double to_hz_per_ms(double rate) { return rate / (two_pi * 1e3); }

constexpr double ms(double t) { return 1e-3 * t; }
constexpr double to_ms(double t) { return 1e3 * t; }

}  // namespace zeno
