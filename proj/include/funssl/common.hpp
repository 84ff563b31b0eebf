#pragma once

#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace funssl {

// Shape/argument violations -> std::invalid_argument ("dimension error" /
// "input error" in the contracts). Numerical failures at runtime
// (non-finite loss, rejected update) -> std::runtime_error.
inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void check_runtime(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

inline constexpr double kPi = std::numbers::pi_v<double>;

}  // namespace funssl
