#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "kernel.hpp"
#include "numerics.hpp"
#include "sampler.hpp"

/// Roughness statistics of sampled paths.
namespace bogo::trajectories {

/// Sum of squared increments over k equal subintervals of the path grid.
inline double quadratic_variation(const PathSample& x, std::size_t k) {
  const std::size_t n = x.intervals();
  if (k == 0 || n % k != 0)
    throw ParameterError("quadratic_variation: k = " + std::to_string(k) + " must divide the grid size " +
                         std::to_string(n));
  const std::size_t stride = n / k;
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double d = x.values[(j + 1) * stride] - x.values[j * stride];
    s += d * d;
  }
  return s;
}

/// E S_N = N Var(x(beta/N) - x(0)).
inline double qvar_exact_mean(const MeasureParams& p, std::size_t N) {
  p.validate();
  if (N == 0) throw ParameterError("qvar_exact_mean: N must be >= 1");
  if (N == 1) return 0.0;
  return static_cast<double>(N) * kernel::increment_variance(p, 0.0, p.beta / static_cast<double>(N));
}

/**
 * E S_N^2 as the closed form of the paper's fourth-moment sum, evaluated in
 * long double. The N^2 terms cancel down to O(1), so double precision loses
 * about log10(N^2 e^{beta omega}) digits.
 */
inline long double qvar_second_moment_closed(const MeasureParams& p, std::size_t N) {
  if (N < 2) throw ParameterError("qvar closed form needs N >= 2");
  using L = long double;
  const L n = static_cast<L>(N), bw = static_cast<L>(p.beta) * p.omega, a = bw / 2, b = bw / n;
  const L ca = std::cosh(a), cab = std::cosh(a - b), sb = std::sinh(b), sbw = std::sinh(bw);
  const L bracket = 4 * n * n * ca * ca + 4 * n * n * cab * cab - 8 * n * n * ca * cab + 6 * n * n -
                    8 * n * n * std::cosh(b) + 2 * n * (n - 1) * std::cosh(2 * b) + 2 * n +
                    2 * n * std::cosh(bw - 2 * b) + 6 * n * sbw * std::cosh(b) / sb - 8 * n * sbw / sb +
                    2 * n * std::sinh(bw - b) / sb;
  const L den = 2 * static_cast<L>(p.m) * p.omega * std::sinh(a);
  return bracket / (den * den);
}

/// sum_{n,m} E x(t_n)^2 x(t_m)^2, the first partial sum of the closed form.
inline long double qvar_point_fourth_sum_closed(const MeasureParams& p, std::size_t N) {
  using L = long double;
  const L n = static_cast<L>(N), bw = static_cast<L>(p.beta) * p.omega;
  const L ca = std::cosh(bw / 2), den = 2 * static_cast<L>(p.m) * p.omega * std::sinh(bw / 2);
  return (n * n * ca * ca + n * n + n * std::sinh(bw) / std::tanh(bw / n)) / (den * den);
}

/**
 * Covariance of the increments D_j = x(t_j) - x(t_{j-1}) at lag d (circulant):
 * c(0) = Var D, c(d) = -cosh(omega d Delta - beta omega/2) 4 sinh^2(omega Delta/2) / (2 m omega sinh(beta omega/2)).
 */
inline double increment_lag_covariance(const MeasureParams& p, std::size_t N, std::size_t d) {
  const double delta = p.beta / static_cast<double>(N);
  d %= N;
  if (d == 0) return kernel::increment_variance(p, 0.0, delta);
  const double hb = p.half_bw(), s = std::sinh(0.5 * p.omega * delta);
  return -numerics::cosh_over_sinh(p.omega * static_cast<double>(d) * delta - hb, hb) * 4.0 * s * s /
         (2.0 * p.m * p.omega);
}

/// Var S_N = 2 sum_{j,k} c(j-k)^2 = 2 N sum_d c(d)^2.
inline double qvar_exact_variance(const MeasureParams& p, std::size_t N) {
  if (N < 2) return 0.0;
  std::vector<double> sq(N);
  for (std::size_t d = 0; d < N; ++d) {
    const double c = increment_lag_covariance(p, N, d);
    sq[d] = c * c;
  }
  return 2.0 * static_cast<double>(N) * numerics::pairwise_sum(sq);
}

/// I_N = E (S_N - beta/m)^2 from the closed-form second moment.
inline double qvar_exact_I_N(const MeasureParams& p, std::size_t N) {
  p.validate();
  if (N < 2) throw ParameterError("qvar_exact_I_N: N must be >= 2");
  const long double lim = static_cast<long double>(p.beta) / p.m;
  const long double s1 = static_cast<long double>(N) * kernel::increment_variance(p, 0.0, p.beta / static_cast<double>(N));
  return static_cast<double>(qvar_second_moment_closed(p, N) - 2 * lim * s1 + lim * lim);
}

/// I_N = Var S_N + (E S_N - beta/m)^2, free of large cancellations.
inline double qvar_I_N_stable(const MeasureParams& p, std::size_t N) {
  const double bias = qvar_exact_mean(p, N) - p.beta / p.m;
  return qvar_exact_variance(p, N) + bias * bias;
}

struct HolderMeasure {
  double value = 0.0;  ///< measure of {|x(t) - x(t')| <= h |t - t'|^gamma}
  double bound = 0.0;  ///< sqrt(2/pi) a
  double a = 0.0;
};

inline HolderMeasure holder_set_measure(const MeasureParams& p, double h, double gamma, double t, double t2) {
  p.validate();
  if (!(h > 0.0)) throw ParameterError("holder_set_measure: h must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ParameterError("holder_set_measure: gamma must lie in (0, 1]");
  kernel::detail::check_time(p, t, "t");
  kernel::detail::check_time(p, t2, "t2");
  if (t == t2) throw DomainError("holder_set_measure: t and t' must differ");
  const double d = std::abs(t - t2);
  const double var = kernel::increment_variance(p, std::min(t, t2), std::max(t, t2));
  HolderMeasure r;
  if (!(var > 0.0)) {
    // t and t' are identified by periodicity: the increment vanishes
    r.a = std::numeric_limits<double>::infinity();
    r.value = 1.0;
    r.bound = r.a;
    return r;
  }
  r.a = h * std::pow(d, gamma) / std::sqrt(var);
  r.value = std::erf(r.a / std::numbers::sqrt2);
  r.bound = std::sqrt(2.0 / std::numbers::pi) * r.a;
  return r;
}

struct QVarReport {
  std::size_t N = 0;
  std::size_t n_paths = 0;
  double sample_mean = 0.0;
  double sample_mean_se = 0.0;
  double sample_var = 0.0;
  double sample_I_N = 0.0;  ///< mean of (S_N - beta/m)^2
  double sample_I_N_se = 0.0;
  double exact_mean = 0.0;
  double exact_var = 0.0;
  double exact_I_N = 0.0;
};

/// S_N over finite-dimensional paths drawn on a grid of `grid` intervals (N must divide it).
inline QVarReport qvar_report(const MeasureParams& p, std::size_t N, sampler::SamplingOptions o) {
  if (o.grid == 0) o.grid = N;
  const double lim = p.beta / p.m;
  const auto s = sampler::simulate_paths(p, o, 2, [&](std::size_t, const PathSample& x, std::span<double> row) {
    const double q = quadratic_variation(x, N);
    row[0] = q;
    row[1] = (q - lim) * (q - lim);
  });
  QVarReport r;
  r.N = N;
  r.n_paths = o.n_paths;
  const auto m = sampler::column_report(s, 0, o);
  const auto i = sampler::column_report(s, 1, o);
  r.sample_mean = m.estimate;
  r.sample_mean_se = m.std_error;
  r.sample_var = m.std_error * m.std_error * static_cast<double>(m.n_samples);
  r.sample_I_N = i.estimate;
  r.sample_I_N_se = i.std_error;
  r.exact_mean = qvar_exact_mean(p, N);
  r.exact_var = N >= 2 ? qvar_exact_variance(p, N) : 0.0;
  r.exact_I_N = N >= 2 ? qvar_exact_I_N(p, N) : lim * lim;
  return r;
}

/// Least-squares slope of mean log|x(t + delta) - x(t)| against log delta, delta = stride * dt.
inline double roughness_slope(const std::vector<PathSample>& paths, const std::vector<std::size_t>& strides) {
  if (paths.empty() || strides.size() < 2) throw ParameterError("roughness_slope needs paths and two strides");
  std::vector<double> lx, ly;
  for (std::size_t st : strides) {
    std::vector<double> logs;
    for (const auto& x : paths) {
      const std::size_t n = x.intervals();
      for (std::size_t j = 0; j < n; ++j) {
        const double d = std::abs(x.values[(j + st) % n] - x.values[j]);
        if (d > 0.0) logs.push_back(std::log(d));
      }
    }
    lx.push_back(std::log(static_cast<double>(st) * paths.front().dt()));
    ly.push_back(numerics::pairwise_sum(logs) / static_cast<double>(logs.size()));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace bogo::trajectories
