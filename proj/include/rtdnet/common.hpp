// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rtdnet {

// Error taxonomy used across the library. The CLI maps IoError/ContractError
// to exit code 2 and NumericalError to exit code 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mathematical domain violation (log of non-positive value, t <= 0, ...).
struct DomainError : Error {
  using Error::Error;
};

// API misuse: shape mismatch, empty input, invalid configuration.
struct ContractError : Error {
  using Error::Error;
};

// Non-finite loss or gradient during optimization.
struct NumericalError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double ln_2pi = 1.8378770664093454836;  // log(2*pi)
inline constexpr double sqrt2 = 1.4142135623730950488;
inline constexpr double inv_sqrt_2pi = 0.3989422804014326779;

// Degenerate-MLE clamps. Keeps likelihoods finite when all samples of a
// fitted set coincide.
inline constexpr double sigma_min = 1e-6;
inline constexpr double lambda_max = 1e12;

// Lower bound applied to log-survival terms of censored observations.
inline constexpr double log_survival_floor = -690.77552789821368;  // log(1e-300)
}  // namespace constants

}  // namespace rtdnet
