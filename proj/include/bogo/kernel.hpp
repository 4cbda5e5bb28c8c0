#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "numerics.hpp"
#include "params.hpp"

/// Covariance kernel of the periodic Gaussian path measure and its grid restriction.
namespace bogo::kernel {

namespace detail {
inline void check_time(const MeasureParams& p, double t, const char* name) {
  const double tol = 1e-12 * p.beta;
  if (!(t >= -tol && t <= p.beta + tol))
    throw DomainError(std::string(name) + " = " + std::to_string(t) + " outside [0, beta]");
}
}  // namespace detail

/// B(t, s) for t, s in [0, beta]. Stable for large beta*omega.
inline double covariance(const MeasureParams& p, double t, double s) {
  detail::check_time(p, t, "t");
  detail::check_time(p, s, "s");
  const double hb = p.half_bw();
  const double a = std::min(p.omega * std::abs(t - s), 2.0 * hb) - hb;
  return numerics::cosh_over_sinh(a, hb) / (2.0 * p.m * p.omega);
}

/// B(t, t), the one-time variance.
inline double variance(const MeasureParams& p) {
  return numerics::coth(p.half_bw()) / (2.0 * p.m * p.omega);
}

/// Eigenvalue lambda_n = 1 / (m (omega^2 + (2 pi n / beta)^2)).
inline double eigenvalue(const MeasureParams& p, long n) {
  const double k = 2.0 * std::numbers::pi * static_cast<double>(n) / p.beta;
  return 1.0 / (p.m * (p.omega * p.omega + k * k));
}

/// Real orthonormal eigenfunction: cosine for n > 0, sine for n < 0, constant for n = 0.
inline double eigenfunction(const MeasureParams& p, long n, double t) {
  if (n == 0) return 1.0 / std::sqrt(p.beta);
  const double arg = 2.0 * std::numbers::pi * static_cast<double>(n) * t / p.beta;
  const double c = std::sqrt(2.0 / p.beta);
  return n > 0 ? c * std::cos(arg) : c * std::sin(arg);
}

struct EigenPair {
  long n = 0;
  double lambda = 0.0;
  double beta = 1.0;
  double phi(double t) const {
    if (n == 0) return 1.0 / std::sqrt(beta);
    const double arg = 2.0 * std::numbers::pi * static_cast<double>(n) * t / beta;
    const double c = std::sqrt(2.0 / beta);
    return n > 0 ? c * std::cos(arg) : c * std::sin(arg);
  }
};

/// Eigenpairs for n = -n_max .. n_max.
inline std::vector<EigenPair> eigen_system(const MeasureParams& p, long n_max) {
  if (n_max < 0) throw ParameterError("n_max must be non-negative");
  std::vector<EigenPair> out;
  out.reserve(static_cast<std::size_t>(2 * n_max + 1));
  for (long n = -n_max; n <= n_max; ++n) out.push_back({n, eigenvalue(p, n), p.beta});
  return out;
}

/// Tr B = sum of eigenvalues, in closed form.
inline double trace(const MeasureParams& p) { return p.beta * variance(p); }

/// Upper bound on sum_{|n| > n_max} lambda_n^k.
inline double eigen_tail_bound(const MeasureParams& p, long n_max, int k = 1) {
  if (k < 1) throw ParameterError("power k must be >= 1");
  const double c = 2.0 * std::numbers::pi / p.beta;
  const double N = static_cast<double>(n_max);
  if (k == 1) return 2.0 / (p.m * c * p.omega) * (0.5 * std::numbers::pi - std::atan(c * N / p.omega));
  if (n_max >= 1) return 2.0 * std::pow(p.m * c * c, -k) * std::pow(N, 1 - 2 * k) / (2.0 * k - 1.0);
  const double kk = static_cast<double>(k);
  return 2.0 / (std::pow(p.m, kk) * c) * std::pow(p.omega, 1.0 - 2.0 * kk) * std::sqrt(std::numbers::pi) *
         std::tgamma(kk - 0.5) / (2.0 * std::tgamma(kk));
}

struct Truncation {
  long n_max = 0;
  double tail_bound = 0.0;
  bool capped = false;
};

/// Smallest n_max whose eigenvalue tail is below rel_tol * Tr B, clamped at `cap`.
inline Truncation default_truncation(const MeasureParams& p, double rel_tol = 1e-10, long cap = 10'000'000) {
  const double delta = rel_tol * trace(p) * std::numbers::pi * p.m * p.omega / p.beta;
  const double n = p.beta * p.omega / (2.0 * std::numbers::pi) / std::tan(delta);
  Truncation t;
  if (!(n < static_cast<double>(cap))) {
    t.n_max = cap;
    t.capped = true;
  } else {
    t.n_max = static_cast<long>(std::ceil(n));
  }
  t.tail_bound = eigen_tail_bound(p, t.n_max, 1);
  return t;
}

/// Truncated Mercer sum over |n| <= n_max.
inline double truncated_covariance(const MeasureParams& p, double t, double s, long n_max) {
  double acc = 0.0;
  const double d = 2.0 * std::numbers::pi * (t - s) / p.beta;
  for (long n = n_max; n >= 1; --n) acc += eigenvalue(p, n) * std::cos(static_cast<double>(n) * d);
  return (eigenvalue(p, 0) + 2.0 * acc) / p.beta;
}

/// Var(x(t2) - x(t1)) for t1 <= t2, computed without cancellation.
inline double increment_variance(const MeasureParams& p, double t1, double t2) {
  detail::check_time(p, t1, "t1");
  detail::check_time(p, t2, "t2");
  if (t1 > t2) throw DomainError("increment_variance requires t1 <= t2");
  const double h = 0.5 * p.omega * (t2 - t1);
  const double hb = p.half_bw();
  if (h == 0.0) return 0.0;
  return 2.0 * std::sinh(h) * numerics::sinh_ratio(std::max(hb - h, 0.0), hb) / (p.m * p.omega);
}

/**
 * Covariance of (x(s_0), ..., x(s_{N-1})) at s_j = beta j / N, with its inverse
 * and determinant of the inverse in closed form. A is circulant; A_inv is the
 * cyclic tridiagonal matrix (m omega / sinh theta)(2 cosh theta I - S - S^T),
 * theta = beta omega / N, where coincident neighbours (N <= 2) add up.
 */
struct GridCovariance {
  MeasureParams params;
  std::size_t N = 0;
  std::vector<double> times;
  Eigen::MatrixXd A;
  Eigen::MatrixXd A_inv;
  double det_A_inv = 0.0;
  double log_det_A_inv = 0.0;
  std::vector<std::string> warnings;

  double theta() const { return params.beta * params.omega / static_cast<double>(N); }
};

/// Diagonal and off-diagonal entries of the closed-form inverse.
struct PrecisionEntries {
  double diag = 0.0;
  double off = 0.0;  ///< value of one cyclic neighbour; N = 2 doubles it, N = 1 folds it into diag
};

inline PrecisionEntries precision_entries(const MeasureParams& p, std::size_t N) {
  const double th = p.beta * p.omega / static_cast<double>(N);
  // m omega / sinh(theta) and 2 m omega coth(theta), overflow-free
  const double inv_sinh = 2.0 * std::exp(-th) / -std::expm1(-2.0 * th);
  PrecisionEntries e;
  e.diag = 2.0 * p.m * p.omega * numerics::coth(th);
  e.off = -p.m * p.omega * inv_sinh;
  return e;
}

inline double log_det_precision(const MeasureParams& p, std::size_t N) {
  const double th = p.beta * p.omega / static_cast<double>(N);
  const double n = static_cast<double>(N);
  return n * (std::log(p.m * p.omega) - numerics::log_sinh(th)) + 2.0 * (std::numbers::ln2 + numerics::log_sinh(p.half_bw()));
}

inline GridCovariance grid_covariance(const MeasureParams& p, std::size_t N) {
  p.validate();
  if (N == 0) throw ParameterError("grid size N must be >= 1");
  GridCovariance g;
  g.params = p;
  g.N = N;
  const auto n = static_cast<Eigen::Index>(N);
  g.times.resize(N);
  for (std::size_t j = 0; j < N; ++j) g.times[j] = p.beta * static_cast<double>(j) / static_cast<double>(N);
  const double hb = p.half_bw();
  const double th = g.theta();
  g.A.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      g.A(j, k) = numerics::cosh_over_sinh(hb - th * static_cast<double>(std::abs(j - k)), hb) / (2.0 * p.m * p.omega);
  const PrecisionEntries e = precision_entries(p, N);
  g.A_inv = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    g.A_inv(j, j) += e.diag;
    g.A_inv(j, (j + 1) % n) += e.off;
    g.A_inv(j, (j + n - 1) % n) += e.off;
  }
  g.log_det_A_inv = log_det_precision(p, N);
  g.det_A_inv = std::exp(g.log_det_A_inv);
  if (!std::isfinite(g.det_A_inv) || g.det_A_inv == 0.0)
    g.warnings.push_back("det(A_inv) not representable in double; use log_det_A_inv = " +
                         std::to_string(g.log_det_A_inv));
  return g;
}

/// log density of N(0, A) at q.
inline double marginal_log_density(const GridCovariance& g, std::span<const double> q) {
  if (q.size() != g.N) throw ParameterError("marginal_log_density: dimension mismatch");
  const Eigen::Map<const Eigen::VectorXd> v(q.data(), static_cast<Eigen::Index>(q.size()));
  const double quad = v.dot(g.A_inv * v);
  return -0.5 * static_cast<double>(g.N) * std::log(2.0 * std::numbers::pi) + 0.5 * g.log_det_A_inv - 0.5 * quad;
}

}  // namespace bogo::kernel
