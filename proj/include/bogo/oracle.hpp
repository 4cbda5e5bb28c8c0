#pragma once

#include <cmath>
#include <bit>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kernel.hpp"
#include "numerics.hpp"
#include "params.hpp"

/// Closed-form and combinatorial moments of the Gaussian path measure.
namespace bogo::oracle {

inline constexpr std::size_t wick_hard_cap = 20;

struct WickOptions {
  std::size_t max_order = 12;  ///< raise up to wick_hard_cap
};

/**
 * E[x(t_1) ... x(t_n)] by Wick pairing with covariance `cov(t, s)`.
 * Pairs the smallest unpaired index first; subsets are memoized so the cost is
 * O(n 2^n) and the summation order is fixed.
 */
template <class Cov>
double wick_moment(Cov&& cov, std::span<const double> times, WickOptions opt = {}) {
  const std::size_t n = times.size();
  if (opt.max_order > wick_hard_cap)
    throw ParameterError("Wick order cap cannot exceed " + std::to_string(wick_hard_cap));
  if (n > opt.max_order)
    throw ParameterError("Wick moment of order " + std::to_string(n) + " exceeds cap " +
                         std::to_string(opt.max_order));
  if (n == 0) return 1.0;
  if (n % 2 == 1) return 0.0;
  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = cov(times[i], times[j]);
  const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1u);
  // f[mask] = sum over pairings of the complement of mask
  std::vector<double> f(std::size_t{1} << n, 0.0);
  f[full] = 1.0;
  for (std::uint32_t mask = full; mask-- > 0;) {
    if (std::popcount(mask) % 2 != 0) continue;
    const std::uint32_t free = full & ~mask;
    const int i = std::countr_zero(free);
    double acc = 0.0;
    for (std::uint32_t rest = free & ~(1u << i); rest != 0; rest &= rest - 1) {
      const int j = std::countr_zero(rest);
      acc += c[static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)] * f[mask | (1u << i) | (1u << j)];
    }
    f[mask] = acc;
  }
  return f[0];
}

inline double wick_moment(const MeasureParams& p, std::span<const double> times, WickOptions opt = {}) {
  return wick_moment([&p](double t, double s) { return kernel::covariance(p, t, s); }, times, opt);
}

namespace detail {
inline double check_lambda(const MeasureParams& p, double lambda) {
  if (!std::isfinite(lambda) || lambda >= p.stiffness())
    throw DomainError("lambda must be below m omega^2 = " + std::to_string(p.stiffness()));
  return std::sqrt(p.omega * p.omega - lambda / p.m);
}
}  // namespace detail

/// Fredholm determinant D_B(lambda) = det(1 - lambda B), lambda < m omega^2.
inline double fredholm_det(const MeasureParams& p, double lambda) {
  const double s = detail::check_lambda(p, lambda);
  const double r = numerics::sinh_ratio(0.5 * p.beta * s, p.half_bw());
  return r * r;
}

/// E exp((lambda/2) int x^2) = D_B(lambda)^{-1/2}.
inline double exp_quadratic(const MeasureParams& p, double lambda) {
  const double s = detail::check_lambda(p, lambda);
  return numerics::sinh_ratio(p.half_bw(), 0.5 * p.beta * s);
}

/// Analytic continuation of exp_quadratic into |z| < m omega^2.
inline std::complex<double> exp_quadratic(const MeasureParams& p, std::complex<double> z) {
  const std::complex<double> s = std::sqrt(std::complex<double>(p.omega * p.omega) - z / p.m);
  return numerics::sinh_ratio(std::complex<double>(p.half_bw()), 0.5 * p.beta * s);
}

struct SeriesValue {
  double value = 0.0;
  long n_max = 0;
  double tail_bound = 0.0;  ///< bound on |infinite sum - value| (or relative, see function)
};

/// Partial product prod_{|n| <= n_max} (1 - lambda lambda_n); tail_bound is relative.
inline SeriesValue fredholm_det_truncated(const MeasureParams& p, double lambda, long n_max) {
  detail::check_lambda(p, lambda);
  if (n_max < 0) throw ParameterError("n_max must be non-negative");
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(n_max) + 1);
  for (long n = n_max; n >= 1; --n) logs.push_back(2.0 * std::log1p(-lambda * kernel::eigenvalue(p, n)));
  logs.push_back(std::log1p(-lambda * kernel::eigenvalue(p, 0)));
  SeriesValue r;
  r.value = std::exp(numerics::pairwise_sum(logs));
  r.n_max = n_max;
  const double t = std::abs(lambda) * kernel::eigen_tail_bound(p, n_max, 1);
  r.tail_bound = std::expm1(t / std::max(1.0 - std::abs(lambda) * kernel::eigenvalue(p, n_max + 1), 1e-300));
  return r;
}

/**
 * Partial product times the integral of the log-eigenvalue tail from n_max + 1/2
 * to infinity (midpoint Euler-Maclaurin). The tail integral is elementary:
 * the integrand is log((n^2 + q1^2) / (n^2 + q2^2)).
 */
inline SeriesValue fredholm_det_tail_corrected(const MeasureParams& p, double lambda, long n_max) {
  SeriesValue r = fredholm_det_truncated(p, lambda, n_max);
  const double c = 2.0 * std::numbers::pi / p.beta;
  const double q1 = std::sqrt(p.omega * p.omega - lambda / p.m) / c;
  const double q2 = p.omega / c;
  const double X = static_cast<double>(n_max) + 0.5;
  const double tail = std::numbers::pi * (q1 - q2) - X * std::log((X * X + q1 * q1) / (X * X + q2 * q2)) -
                      2.0 * q1 * std::atan(X / q1) + 2.0 * q2 * std::atan(X / q2);
  r.value *= std::exp(2.0 * tail);
  // midpoint error ~ sum g''/24 with g ~ -lambda / (m c^2 n^2)
  const double N = static_cast<double>(std::max<long>(n_max, 1));
  r.tail_bound = std::abs(lambda) / (p.m * c * c) / (12.0 * N * N * N);
  return r;
}

/// Sum over |n| <= n_max of lambda_n^k, with a bound on the omitted tail.
inline SeriesValue iterated_trace(const MeasureParams& p, int k, long n_max) {
  if (k < 1) throw ParameterError("iterated_trace needs k >= 1");
  if (n_max < 0) throw ParameterError("n_max must be non-negative");
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(n_max) + 1);
  for (long n = n_max; n >= 1; --n) terms.push_back(2.0 * std::pow(kernel::eigenvalue(p, n), k));
  terms.push_back(std::pow(kernel::eigenvalue(p, 0), k));
  return {numerics::pairwise_sum(terms), n_max, kernel::eigen_tail_bound(p, n_max, k)};
}

struct MomentResult {
  double value = 0.0;
  int k = 0;
  double radius = 0.0;
  std::size_t nodes = 0;
};

inline constexpr int moment_order_cap = 6;

/**
 * m_k = E (int x^2 dt)^k = 2^k d^k/dlambda^k E exp(lambda/2 int x^2) at 0.
 * Derivative by Cauchy's formula on a circle of radius m omega^2 / 2, inside the
 * disk where the generating function is analytic.
 */
inline MomentResult moment_mk(const MeasureParams& p, int k, std::size_t nodes = 64) {
  if (k < 0 || k > moment_order_cap)
    throw ParameterError("moment order must be in [0, " + std::to_string(moment_order_cap) + "]");
  MomentResult r;
  r.k = k;
  r.radius = 0.5 * p.stiffness();
  r.nodes = nodes;
  if (k == 0) {
    r.value = 1.0;
    return r;
  }
  std::vector<double> re(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(nodes);
    const std::complex<double> z = std::polar(r.radius, a);
    re[j] = (exp_quadratic(p, z) * std::polar(1.0, -a * k)).real();
  }
  const double avg = numerics::pairwise_sum(re) / static_cast<double>(nodes);
  r.value = std::tgamma(k + 1.0) * avg * std::pow(2.0 / r.radius, k);
  return r;
}

/// E exp(a x(t)^2) for -m omega tanh(beta omega/2) <= a < m omega tanh(beta omega/2).
inline double exp_a_qsquared(const MeasureParams& p, double a) {
  const double lim = p.m * p.omega * std::tanh(p.half_bw());
  if (!std::isfinite(a) || a >= lim || a < -lim)
    throw DomainError("exp_a_qsquared: a must lie in [-" + std::to_string(lim) + ", " + std::to_string(lim) + ")");
  return 1.0 / std::sqrt(1.0 - 2.0 * a * kernel::variance(p));
}

/// prod_{n>=1} (1 + a / (n^2 + b^2)) truncated at n_max, a > -b^2 - 1.
inline SeriesValue infinite_product(double a, double b, long n_max) {
  if (n_max < 1) throw ParameterError("n_max must be >= 1");
  if (!(a > -(1.0 + b * b))) throw DomainError("infinite_product: a must exceed -(1 + b^2)");
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(n_max));
  for (long n = n_max; n >= 1; --n) {
    const double nn = static_cast<double>(n);
    logs.push_back(std::log1p(a / (nn * nn + b * b)));
  }
  SeriesValue r;
  r.value = std::exp(numerics::pairwise_sum(logs));
  r.n_max = n_max;
  r.tail_bound = std::expm1(std::abs(a) / static_cast<double>(n_max)) ;
  return r;
}

/// Closed form sinh(pi b c) / (c sinh(pi b)), c = sqrt(1 + a / b^2); a > -b^2, b > 0.
inline double infinite_product_limit(double a, double b) {
  if (!(b > 0.0)) throw DomainError("infinite_product_limit needs b > 0");
  if (!(a > -b * b)) throw DomainError("infinite_product_limit needs a > -b^2");
  const double c = std::sqrt(1.0 + a / (b * b));
  const double x = std::numbers::pi * b * c;
  // sinh(x)/c written as pi b sinh(x)/x to stay finite as c -> 0
  const double shc = (x < 1e-4) ? std::numbers::pi * b * (1.0 + x * x / 6.0) : std::numbers::pi * b * std::sinh(x) / x;
  return shc / std::sinh(std::numbers::pi * b);
}

}  // namespace bogo::oracle
