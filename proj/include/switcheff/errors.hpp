#pragma once

#include <stdexcept>
#include <string>

namespace switcheff {

// Bad run configuration: unknown flags, malformed config files, invalid
// option combinations. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed model-spec strings or specs that do not resolve against a
// dataset. CLI exit code 2.
class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Problems with the data itself: unreadable CSV, invariant violations,
// missing columns. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The estimand P(S=1|T=1,R=f) is zero; the switcher effect is undefined.
class NoSwitchersError : public DataError {
 public:
  using DataError::DataError;
};

// Numerical failures: rank deficiency, non-convergence, infinite weights,
// singular sandwich pieces. CLI exit code 4.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace switcheff
