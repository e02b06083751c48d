#pragma once

#include <stdexcept>
#include <string>

namespace idp {

// Math preconditions (alpha <= 1, sigma <= 0, value out of domain, ...).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File reading/writing failures, including malformed binary formats.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Calibration target unreachable inside the bisection bracket.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace idp
