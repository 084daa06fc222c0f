#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cdtrade {

// Fatal conditions are exceptions; soft conditions travel as bit flags on results.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StrategyExplosion : Error {
  using Error::Error;
};
struct TooLarge : Error {
  using Error::Error;
};
struct ModeViolation : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};

enum Flag : std::uint32_t {
  kNoFlags = 0,
  kDegenerateRow = 1u << 0,
  kMaxIters = 1u << 1,
  kNumericalUnderflow = 1u << 2,
  kStrategyTruncated = 1u << 3,
};

// "DegenerateRow|MaxIters", or "" when clear.
std::string flags_to_string(std::uint32_t flags);

}  // namespace cdtrade
