#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace bogo {

/// Argument outside the mathematical domain of a formula.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Invalid configuration (non-positive mass, zero grid size, ...).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A computation produced something unusable (overflow, too many NaNs, blowup).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Functional cannot be evaluated by the requested rule (e.g. complex nodes, non-polynomial).
struct UnsupportedFunctional : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/**
 * Parameters of the periodic Gaussian path measure: mass m, frequency omega,
 * inverse temperature beta (period). All strictly positive and finite.
 */
struct MeasureParams {
  double m = 1.0;
  double omega = 1.0;
  double beta = 1.0;

  void validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!ok(m)) throw ParameterError("mass m must be positive and finite, got " + std::to_string(m));
    if (!ok(omega)) throw ParameterError("omega must be positive and finite, got " + std::to_string(omega));
    if (!ok(beta)) throw ParameterError("beta must be positive and finite, got " + std::to_string(beta));
  }

  static MeasureParams make(double m, double omega, double beta) {
    MeasureParams p{m, omega, beta};
    p.validate();
    return p;
  }

  MeasureParams with_beta(double b) const { return make(m, omega, b); }

  double half_bw() const { return 0.5 * beta * omega; }
  /// m * omega^2, the spring constant of the quadratic part.
  double stiffness() const { return m * omega * omega; }
};

}  // namespace bogo
