#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace xsdepth {

// All numerical state (network parameters, activations, images) is double
// precision. Desk-scale inputs are small enough that the 2x memory cost is
// irrelevant, and the oracle tolerances (1e-6..1e-9) leave no headroom for
// single-precision cancellation in SSIM statistics and metric reductions.
using Scalar = double;

// Violated precondition or broken invariant on a public API.
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

// Invalid configuration (sizes, scales, weights out of range).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / decode failures. Message always names the offending path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint version mismatch or corruption. Message names the bad field.
class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training aborted (non-finite loss). Carries step diagnostics in message.
class TrainAbortError : public std::runtime_error {
 public:
  explicit TrainAbortError(const std::string& msg) : std::runtime_error(msg) {}
};

#define XS_REQUIRE(cond, msg)                           \
  do {                                                  \
    if (!(cond)) throw ::xsdepth::ContractError(msg);   \
  } while (0)

#define XS_CONFIG_REQUIRE(cond, msg)                    \
  do {                                                  \
    if (!(cond)) throw ::xsdepth::ConfigError(msg);     \
  } while (0)

}  // namespace xsdepth
