#pragma once

#include <cmath>
#include <vector>

#include "kernel.hpp"
#include "numerics.hpp"
#include "potential.hpp"
#include "sampler.hpp"

/// Equilibrium averages: R(h), Gaussian domination and bounds on <q^2>.
namespace bogo::equilibrium {

/// Trapezoid rule for int_0^beta V(x(s) + h) ds on the periodic grid.
inline double action(const PathSample& x, const Potential& V, double h = 0.0) {
  return path_integral(x, [&](double v) { return V(v + h); });
}

/// e^{-beta M h^2/2} e^{h M int x}: the density of the shift x -> x + h, M = m omega^2.
inline double shift_weight(const MeasureParams& p, double h, double int_x) {
  const double M = p.stiffness();
  return std::exp(h * M * int_x - 0.5 * p.beta * M * h * h);
}

struct REstimate {
  double h = 0.0;
  sampler::EstimateReport direct;   ///< E exp(-int V(x + h))
  sampler::EstimateReport shifted;  ///< E[shift weight * exp(-int V(x))]
};

struct DominationReport {
  std::vector<double> h_values;
  std::vector<sampler::EstimateReport> R_estimates;
  std::vector<sampler::EstimateReport> R_shifted;
  std::vector<sampler::EstimateReport> paired_diff;  ///< R(h) - R(0) on the same paths
  sampler::EstimateReport R0;
  std::vector<bool> bound_ok;         ///< R(h) <= R(0) + 4 combined standard errors
  std::vector<double> z_scores;       ///< (R(h) - R(0)) / combined standard error
  bool monotone_in_h = true;          ///< diagnostic only
  bool all_ok() const {
    for (bool b : bound_ok)
      if (!b) return false;
    return true;
  }
};

/**
 * Column layout per path: [R(0), then for each h: direct, shifted]. The
 * shifted form uses the continuum weight with the trapezoid int x, which
 * differs from the exact grid shift by O((beta omega/N)^2).
 */
inline sampler::SampleMatrix simulate_R(const MeasureParams& p, const Potential& V, const std::vector<double>& hs,
                                        const sampler::SamplingOptions& o) {
  potentials::require_even_nonnegative(V);
  return sampler::simulate_paths(p, o, 1 + 2 * hs.size(), [&](std::size_t, const PathSample& x, std::span<double> row) {
    const double base = std::exp(-action(x, V));
    const double ix = path_integral(x, [](double v) { return v; });
    row[0] = base;
    for (std::size_t k = 0; k < hs.size(); ++k) {
      row[1 + 2 * k] = hs[k] == 0.0 ? base : std::exp(-action(x, V, hs[k]));
      row[2 + 2 * k] = shift_weight(p, hs[k], ix) * base;
    }
  });
}

inline REstimate R_of_h(const MeasureParams& p, const Potential& V, double h, const sampler::SamplingOptions& o) {
  const auto s = simulate_R(p, V, {h}, o);
  return {h, sampler::column_report(s, 1, o), sampler::column_report(s, 2, o)};
}

inline DominationReport domination_check(const MeasureParams& p, const Potential& V, const std::vector<double>& hs,
                                         const sampler::SamplingOptions& o) {
  const auto s = simulate_R(p, V, hs, o);
  DominationReport r;
  r.h_values = hs;
  r.R0 = sampler::column_report(s, 0, o);
  for (std::size_t k = 0; k < hs.size(); ++k) {
    const auto d = sampler::column_report(s, 1 + 2 * k, o);
    r.R_estimates.push_back(d);
    r.R_shifted.push_back(sampler::column_report(s, 2 + 2 * k, o));
    r.paired_diff.push_back(sampler::difference_report(s, 1 + 2 * k, 0, o));
    const double se = std::hypot(d.std_error, r.R0.std_error);
    const double diff = d.estimate - r.R0.estimate;
    r.bound_ok.push_back(diff <= 4.0 * se);
    r.z_scores.push_back(se > 0.0 ? diff / se : 0.0);
    if (k > 0 && std::abs(hs[k]) > std::abs(hs[k - 1]) && d.estimate > r.R_estimates[k - 1].estimate)
      r.monotone_in_h = false;
  }
  return r;
}

/**
 * <q^2>_H = E[q^2 e^{-int V}] / E[e^{-int V}] with q = x(0), or the grid
 * average of x^2 (same expectation by stationarity, lower variance).
 */
inline sampler::EstimateReport mean_square_q(const MeasureParams& p, const Potential& V,
                                             const sampler::SamplingOptions& o, bool average_grid = false) {
  potentials::require_even_nonnegative(V);
  const auto s = sampler::simulate_paths(p, o, 2, [&](std::size_t, const PathSample& x, std::span<double> row) {
    const double w = std::exp(-action(x, V));
    double q2 = x.values[0] * x.values[0];
    if (average_grid) q2 = path_integral(x, [](double v) { return v * v; }) / x.beta;
    row[0] = q2 * w;
    row[1] = w;
  });
  const auto den = sampler::column_report(s, 1, o);
  if (!(den.estimate > 4.0 * den.std_error))
    throw NumericalError("mean_square_q: denominator E exp(-int V) is statistically indistinguishable from zero");
  return sampler::ratio_report(s, 0, 1, o);
}

struct FalkBruchInputs {
  double b0 = 0.0;         ///< 1/(beta m omega^2)
  double c0 = 0.0;         ///< beta/m
  double g0 = 0.0;         ///< sqrt(c0 b0)/2 coth(sqrt(c0/(4 b0)))
  double free_value = 0.0; ///< coth(beta omega/2)/(2 m omega)
  double identity_error = 0.0;
};

inline FalkBruchInputs falk_bruch_bound(const MeasureParams& p) {
  p.validate();
  FalkBruchInputs f;
  f.b0 = 1.0 / (p.beta * p.stiffness());
  f.c0 = p.beta / p.m;
  f.g0 = 0.5 * std::sqrt(f.c0 * f.b0) * numerics::coth(std::sqrt(f.c0 / (4.0 * f.b0)));
  f.free_value = kernel::variance(p);
  f.identity_error = std::abs(f.g0 - f.free_value) / f.free_value;
  return f;
}

}  // namespace bogo::equilibrium
