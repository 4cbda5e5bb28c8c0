#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "params.hpp"

namespace bogo {

/// One-dimensional potential V(xi), shared by the dynamics and equilibrium code.
struct Potential {
  std::string name;
  double coupling = 0.0;  ///< c, kappa or g depending on the family
  double lower_bound = 0.0;
  bool even = true;
  std::function<double(double)> V;

  double operator()(double x) const { return V(x); }
};

namespace potentials {

inline Potential zero() { return {"zero", 0.0, 0.0, true, [](double) { return 0.0; }}; }

inline Potential constant(double c) { return {"constant", c, c, true, [c](double) { return c; }}; }

/// kappa xi^2 / 2.
inline Potential quadratic(double kappa) {
  return {"quadratic", kappa, kappa >= 0 ? 0.0 : -std::numeric_limits<double>::infinity(), true,
          [kappa](double x) { return 0.5 * kappa * x * x; }};
}

/// g xi^4.
inline Potential quartic(double g) {
  return {"quartic", g, g >= 0 ? 0.0 : -std::numeric_limits<double>::infinity(), true,
          [g](double x) { return g * x * x * x * x; }};
}

/// Registry lookup: zero, constant, quadratic, quartic.
inline Potential by_name(const std::string& name, double coupling) {
  if (name == "zero") return zero();
  if (name == "constant") return constant(coupling);
  if (name == "quadratic") return quadratic(coupling);
  if (name == "quartic") return quartic(coupling);
  throw ParameterError("unknown potential '" + name + "' (expected zero, constant, quadratic or quartic)");
}

/// Checks V >= 0 and V(x) = V(-x) on sample points in [-span, span].
inline void require_even_nonnegative(const Potential& p, double span = 10.0, int n = 201) {
  for (int i = 0; i < n; ++i) {
    const double x = -span + 2.0 * span * i / (n - 1);
    const double a = p(x), b = p(-x);
    if (!(a >= 0.0)) throw ParameterError("potential " + p.name + " is negative at " + std::to_string(x));
    if (a != b) throw ParameterError("potential " + p.name + " is not even at " + std::to_string(x));
  }
}

}  // namespace potentials
}  // namespace bogo
