#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "params.hpp"

namespace bogo::numerics {

/// cosh(a) / sinh(b) for b > 0 and |a| <= b, without overflow for large b.
inline double cosh_over_sinh(double a, double b) {
  return (std::exp(a - b) + std::exp(-a - b)) / -std::expm1(-2.0 * b);
}

/// sinh(x) / sinh(y) for x, y > 0, without overflow.
inline double sinh_ratio(double x, double y) {
  if (x == 0.0) return 0.0;
  return std::exp(x - y) * (-std::expm1(-2.0 * x)) / (-std::expm1(-2.0 * y));
}

/// sinh(x)/sinh(y) for complex x, y with Re x, Re y > 0.
inline std::complex<double> sinh_ratio(std::complex<double> x, std::complex<double> y) {
  const std::complex<double> one(1.0, 0.0);
  return std::exp(x - y) * (one - std::exp(-2.0 * x)) / (one - std::exp(-2.0 * y));
}

inline double coth(double x) { return 1.0 / std::tanh(x); }

/// log(sinh(x)) for x > 0.
inline double log_sinh(double x) {
  return x + std::log(-std::expm1(-2.0 * x)) - std::numbers::ln2;
}

/// Fixed-order pairwise summation; the result depends only on the input order.
template <class T>
T pairwise_sum(std::span<const T> v) {
  constexpr std::size_t base = 32;
  if (v.size() <= base) {
    T s{};
    for (const T& x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(std::span<const T>(v));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

namespace detail {
/// (P_n(x), P_n'(x)) by the three-term recurrence, |x| < 1.
inline std::pair<double, double> legendre(std::size_t n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (std::size_t k = 2; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
    p0 = p1;
    p1 = p2;
  }
  return {p1, static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0)};
}
}  // namespace detail

/// Gauss-Legendre rule on [-1, 1].
inline Rule gauss_legendre(std::size_t n) {
  if (n == 0) throw ParameterError("Gauss-Legendre order must be positive");
  Rule r;
  r.nodes.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < n / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = detail::legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = detail::legendre(n, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) {
    const double dp = detail::legendre(n, 0.0).second;
    r.weights[n / 2] = 2.0 / (dp * dp);
  }
  return r;
}

/**
 * Composite Gauss-Legendre on [a, b], panels split at every breakpoint inside
 * (a, b) and each sub-interval further cut into `panels` equal pieces.
 */
inline Rule composite_gauss_legendre(double a, double b, std::vector<double> breaks, std::size_t order,
                                     std::size_t panels = 1) {
  if (!(b > a)) throw ParameterError("composite rule needs a < b");
  if (panels == 0) throw ParameterError("panel count must be positive");
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  const double eps = 1e-14 * (b - a);
  std::vector<double> cuts;
  for (double x : breaks) {
    if (x < a - eps || x > b + eps) continue;
    x = std::clamp(x, a, b);
    if (cuts.empty() || x - cuts.back() > eps) cuts.push_back(x);
  }
  const Rule base = gauss_legendre(order);
  Rule r;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double h = (cuts[i + 1] - cuts[i]) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double lo = cuts[i] + h * static_cast<double>(p);
      const double mid = lo + 0.5 * h;
      for (std::size_t k = 0; k < base.size(); ++k) {
        r.nodes.push_back(mid + 0.5 * h * base.nodes[k]);
        r.weights.push_back(0.5 * h * base.weights[k]);
      }
    }
  }
  return r;
}

/// Gauss-Hermite rule for E f(Z), Z ~ N(0, 1). Weights sum to one.
inline Rule gauss_hermite(std::size_t n) {
  if (n == 0) throw ParameterError("Gauss-Hermite order must be positive");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    r.nodes[k] = es.eigenvalues()(i);
    const double v = es.eigenvectors()(0, i);
    r.weights[k] = v * v;
  }
  // exact symmetry
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (r.nodes[n - 1 - k] - r.nodes[k]);
    const double w = 0.5 * (r.weights[k] + r.weights[n - 1 - k]);
    r.nodes[k] = -x;
    r.nodes[n - 1 - k] = x;
    r.weights[k] = r.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

struct MeanStat {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Sample mean and standard error of the mean, both via pairwise sums.
inline MeanStat mean_stat(std::span<const double> x) {
  MeanStat s;
  s.n = x.size();
  if (s.n == 0) return s;
  s.mean = pairwise_sum(x) / static_cast<double>(s.n);
  if (s.n < 2) return s;
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - s.mean) * (x[i] - s.mean);
  const double var = pairwise_sum(std::span<const double>(d)) / static_cast<double>(s.n - 1);
  s.std_error = std::sqrt(var / static_cast<double>(s.n));
  return s;
}

}  // namespace bogo::numerics
