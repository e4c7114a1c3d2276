#pragma once

#include <stdexcept>
#include <string>

namespace pdmc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidStart : Error { using Error::Error; };
struct NonFiniteRate : Error { using Error::Error; };
struct StuckAtBoundary : Error { using Error::Error; };
struct OutsideDomain : Error { using Error::Error; };
struct NegativeIntercept : Error { using Error::Error; };
struct BoundViolation : Error { using Error::Error; };
struct NonMonotoneIntegral : Error { using Error::Error; };
struct ZeroGradient : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };
struct NonUnitVelocity : Error { using Error::Error; };
struct TooFewSamples : Error { using Error::Error; };
struct NonFinitePotential : Error { using Error::Error; };
struct UnsupportedFunction : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace pdmc
