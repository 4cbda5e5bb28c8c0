#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <bogo/oracle.hpp>

#include "test_support.hpp"

using bogo::MeasureParams;
namespace oracle = bogo::oracle;
namespace kernel = bogo::kernel;
using testsupport::rel_err;

namespace {

// Brute-force enumeration of all pairings, no memoization.
double pairings(const std::vector<double>& t, std::vector<bool>& used, const MeasureParams& p) {
  std::size_t i = 0;
  while (i < t.size() && used[i]) ++i;
  if (i == t.size()) return 1.0;
  used[i] = true;
  double acc = 0.0;
  for (std::size_t j = i + 1; j < t.size(); ++j) {
    if (used[j]) continue;
    used[j] = true;
    acc += testsupport::naive_kernel(p, t[i], t[j]) * pairings(t, used, p);
    used[j] = false;
  }
  used[i] = false;
  return acc;
}

// moments of int x^2 from cumulants kappa_j = 2^{j-1} (j-1)! sum lambda^j
double moment_from_cumulants(const MeasureParams& p, int k) {
  std::vector<double> kap(static_cast<std::size_t>(k) + 1), mom(static_cast<std::size_t>(k) + 1);
  for (int j = 1; j <= k; ++j) {
    double s = 0.0;
    if (j == 1) {
      s = testsupport::integrate([&](double t) { return testsupport::naive_kernel(p, t, t); }, 0, p.beta);
    } else {
      for (long n = 100000; n >= 1; --n) s += 2.0 * std::pow(kernel::eigenvalue(p, n), j);
      s += std::pow(kernel::eigenvalue(p, 0), j);
    }
    kap[static_cast<std::size_t>(j)] = std::pow(2.0, j - 1) * std::tgamma(j) * s;
  }
  mom[0] = 1.0;
  for (int n = 1; n <= k; ++n) {
    double acc = 0.0;
    for (int j = 1; j <= n; ++j)
      acc += std::tgamma(n) / (std::tgamma(j) * std::tgamma(n - j + 1)) * kap[static_cast<std::size_t>(j)] *
             mom[static_cast<std::size_t>(n - j)];
    mom[static_cast<std::size_t>(n)] = acc;
  }
  return mom[static_cast<std::size_t>(k)];
}

}  // namespace

TEST(Wick, SecondMomentIsCovariance) {
  const auto p = MeasureParams::make(1.2, 0.8, 1.5);
  const double t[2] = {0.2, 1.1};
  EXPECT_NEAR(oracle::wick_moment(p, t), testsupport::naive_kernel(p, 0.2, 1.1), 1e-15);
}

TEST(Wick, OddMomentsVanish) {
  const auto p = MeasureParams::make(1, 1, 1);
  const double t[5] = {0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_EQ(oracle::wick_moment(p, t), 0.0);
}

TEST(Wick, MatchesBruteForcePairings) {
  const auto p = MeasureParams::make(0.9, 1.3, 1.1);
  for (std::size_t n : {4u, 6u, 8u, 10u}) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = p.beta * std::fmod(0.137 * static_cast<double>(i * i + 1), 1.0);
    std::vector<bool> used(n, false);
    EXPECT_LT(rel_err(oracle::wick_moment(p, t), pairings(t, used, p)), 1e-13) << n;
  }
}

TEST(Wick, ConstantCovarianceGivesDoubleFactorial) {
  std::vector<double> t(16, 0.0);
  const double v = oracle::wick_moment([](double, double) { return 2.0; }, t, {.max_order = 20});
  EXPECT_DOUBLE_EQ(v, 2027025.0 * 256.0);  // 15!! * 2^8
}

TEST(Wick, OrderCap) {
  const auto p = MeasureParams::make(1, 1, 1);
  std::vector<double> t(14, 0.1);
  EXPECT_THROW(oracle::wick_moment(p, t), bogo::ParameterError);
  EXPECT_NO_THROW(oracle::wick_moment(p, t, {.max_order = 14}));
  EXPECT_THROW(oracle::wick_moment(p, t, {.max_order = 21}), bogo::ParameterError);
}

TEST(Fredholm, ZeroAndDomain) {
  const auto p = MeasureParams::make(1.5, 0.7, 2.0);
  EXPECT_NEAR(oracle::fredholm_det(p, 0.0), 1.0, 1e-15);
  EXPECT_THROW(oracle::fredholm_det(p, p.stiffness()), bogo::DomainError);
  EXPECT_THROW(oracle::exp_quadratic(p, 2 * p.stiffness()), bogo::DomainError);
}

TEST(Fredholm, EqualsEigenProduct) {
  const auto p = MeasureParams::make(1, 1, 1);
  const double lambda = 0.5 * p.stiffness();
  const double closed = oracle::fredholm_det(p, lambda);
  const auto raw = oracle::fredholm_det_truncated(p, lambda, 100000);
  EXPECT_LE(std::abs(raw.value - closed), raw.tail_bound * closed);
  const auto corr = oracle::fredholm_det_tail_corrected(p, lambda, 100000);
  EXPECT_LT(std::abs(corr.value - closed), 1e-8);
  EXPECT_LT(std::abs(corr.value - closed), 1e-10);
}

TEST(Fredholm, NegativeLambdaProduct) {
  const auto p = MeasureParams::make(0.7, 1.9, 1.4);
  const double closed = oracle::fredholm_det(p, -3.0);
  EXPECT_LT(rel_err(oracle::fredholm_det_tail_corrected(p, -3.0, 20000).value, closed), 1e-11);
}

TEST(ExpQuadratic, SmallLambdaExpansion) {
  const auto p = MeasureParams::make(1.1, 0.9, 1.3);
  const double eps = 1e-6;
  EXPECT_NEAR((oracle::exp_quadratic(p, eps) - 1.0) / eps, 0.5 * kernel::trace(p), 1e-6);
}

TEST(ExpQuadratic, ComplexContinuationAgreesOnRealAxis) {
  const auto p = MeasureParams::make(1.1, 0.9, 1.3);
  for (double l : {-2.0, -0.3, 0.0, 0.4, 0.8}) {
    const auto z = oracle::exp_quadratic(p, std::complex<double>(l, 0.0));
    EXPECT_NEAR(z.real(), oracle::exp_quadratic(p, l), 1e-14);
    EXPECT_NEAR(z.imag(), 0.0, 1e-14);
  }
}

TEST(Moments, MatchCumulantExpansion) {
  for (const auto& p : {MeasureParams::make(1, 1, 1), MeasureParams::make(0.6, 1.7, 2.2)}) {
    for (int k = 1; k <= 6; ++k)
      EXPECT_LT(rel_err(oracle::moment_mk(p, k).value, moment_from_cumulants(p, k)), 1e-9) << k;
  }
}

TEST(Moments, SecondMomentIdentity) {
  const auto p = MeasureParams::make(1.3, 0.8, 1.6);
  const double tr = kernel::trace(p);
  const auto s2 = oracle::iterated_trace(p, 2, 200000);
  EXPECT_LT(rel_err(oracle::moment_mk(p, 2).value, tr * tr + 2 * s2.value), 1e-10);
  EXPECT_THROW(oracle::moment_mk(p, 7), bogo::ParameterError);
}

TEST(IteratedTrace, FirstPowerIsTrace) {
  const auto p = MeasureParams::make(1, 1, 1);
  const auto s = oracle::iterated_trace(p, 1, 1000000);
  EXPECT_LE(kernel::trace(p) - s.value, s.tail_bound);
  EXPECT_GE(kernel::trace(p) - s.value, 0.0);
}

TEST(ExpAQSquared, MatchesGaussianIntegral) {
  const auto p = MeasureParams::make(1.2, 0.9, 1.4);
  const double var = testsupport::naive_kernel(p, 0.3, 0.3);
  for (double a : {-0.6, -0.2, 0.1, 0.3}) {
    const double sd = std::sqrt(var);
    const double num = testsupport::integrate(
        [&](double q) { return std::exp(a * q * q - q * q / (2 * var)) / (sd * std::sqrt(2 * std::numbers::pi)); },
        -40 * sd, 40 * sd, {}, 40, 40);
    EXPECT_LT(rel_err(oracle::exp_a_qsquared(p, a), num), 1e-10) << a;
  }
  const double lim = p.m * p.omega * std::tanh(p.half_bw());
  EXPECT_NO_THROW(oracle::exp_a_qsquared(p, -lim));
  EXPECT_THROW(oracle::exp_a_qsquared(p, lim), bogo::DomainError);
}

TEST(InfiniteProduct, ConvergesToClosedForm) {
  const auto r = oracle::infinite_product(1.0, 1.0, 1000000);
  const double lim = oracle::infinite_product_limit(1.0, 1.0);
  EXPECT_LT(std::abs(r.value - lim), 1e-5);
  EXPECT_LE(std::abs(r.value - lim), r.tail_bound * lim);
}

TEST(InfiniteProduct, ContinuousAtLowerEndpoint) {
  const double b = 0.8;
  const double edge = std::numbers::pi * b / std::sinh(std::numbers::pi * b);
  EXPECT_NEAR(oracle::infinite_product_limit(-b * b + 1e-9, b), edge, 1e-8);
  EXPECT_NEAR(oracle::infinite_product_limit(-b * b + 1e-3, b), edge, 1e-2);
  EXPECT_THROW(oracle::infinite_product_limit(-b * b, b), bogo::DomainError);
}
