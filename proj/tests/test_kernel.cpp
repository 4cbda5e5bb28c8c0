#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include <bogo/kernel.hpp>

#include "test_support.hpp"

using bogo::MeasureParams;
namespace kernel = bogo::kernel;
using testsupport::rel_err;

TEST(Params, RejectsNonPositive) {
  EXPECT_THROW(MeasureParams::make(0.0, 1.0, 1.0), bogo::ParameterError);
  EXPECT_THROW(MeasureParams::make(1.0, -1.0, 1.0), bogo::ParameterError);
  EXPECT_THROW(MeasureParams::make(1.0, 1.0, NAN), bogo::ParameterError);
}

TEST(Kernel, MatchesHyperbolicFormula) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto p = testsupport::random_params(rng, 0.3, 3.0);
    const double t = p.beta * u(rng), s = p.beta * u(rng);
    EXPECT_LT(rel_err(kernel::covariance(p, t, s), testsupport::naive_kernel(p, t, s)), 1e-13);
  }
}

TEST(Kernel, SymmetricPositiveAndPeriodic) {
  const auto p = MeasureParams::make(1.3, 0.7, 2.1);
  for (double t : {0.0, 0.4, 1.0, 2.1})
    for (double s : {0.0, 0.3, 1.7}) {
      EXPECT_DOUBLE_EQ(kernel::covariance(p, t, s), kernel::covariance(p, s, t));
      EXPECT_GT(kernel::covariance(p, t, s), 0.0);
    }
  EXPECT_NEAR(kernel::covariance(p, 0.0, 0.0), kernel::covariance(p, 0.0, p.beta), 1e-15);
}

TEST(Kernel, RejectsTimesOutsidePeriod) {
  const auto p = MeasureParams::make(1, 1, 1);
  EXPECT_THROW(kernel::covariance(p, -0.1, 0.2), bogo::DomainError);
  EXPECT_THROW(kernel::covariance(p, 0.1, 1.2), bogo::DomainError);
}

TEST(Kernel, LargeBetaOmegaStaysFinite) {
  const auto p = MeasureParams::make(1.0, 40.0, 20.0);  // beta omega = 800
  EXPECT_NEAR(kernel::covariance(p, 1.0, 1.0), 1.0 / 80.0, 1e-15);
  const double far = kernel::covariance(p, 0.0, 10.0);
  EXPECT_TRUE(std::isfinite(far));
  EXPECT_GE(far, 0.0);
  EXPECT_NEAR(kernel::covariance(p, 0.0, 0.01), std::exp(-0.4) / 80.0, 1e-14);
}

TEST(Kernel, MercerSeriesConverges) {
  const auto p = MeasureParams::make(1.0, 1.0, 1.0);
  for (auto [t, s] : {std::pair{0.1, 0.7}, std::pair{0.5, 0.5}, std::pair{0.0, 1.0}}) {
    const long n = 200000;
    const double trunc = kernel::truncated_covariance(p, t, s, n);
    EXPECT_NEAR(trunc, testsupport::mercer_kernel(p, t, s, n), 1e-12);
    EXPECT_LE(std::abs(trunc - kernel::covariance(p, t, s)), kernel::eigen_tail_bound(p, n) / p.beta * 2.0);
  }
}

TEST(Kernel, EigenfunctionsOrthonormal) {
  const auto p = MeasureParams::make(1.0, 1.0, 1.7);
  for (long a = -3; a <= 3; ++a)
    for (long b = -3; b <= 3; ++b) {
      const double ip = testsupport::integrate(
          [&](double t) { return kernel::eigenfunction(p, a, t) * kernel::eigenfunction(p, b, t); }, 0.0, p.beta);
      EXPECT_NEAR(ip, a == b ? 1.0 : 0.0, 1e-13);
    }
}

TEST(Kernel, EigenfunctionEquation) {
  // int B(t, s) phi_n(s) ds = lambda_n phi_n(t)
  const auto p = MeasureParams::make(0.8, 1.4, 1.3);
  for (long n : {-2L, -1L, 0L, 1L, 3L})
    for (double t : {0.0, 0.37, 1.1}) {
      const double lhs = testsupport::integrate(
          [&](double s) { return testsupport::naive_kernel(p, t, s) * kernel::eigenfunction(p, n, s); }, 0.0, p.beta,
          {t});
      EXPECT_NEAR(lhs, kernel::eigenvalue(p, n) * kernel::eigenfunction(p, n, t), 1e-12);
    }
}

TEST(Kernel, TraceClosedForm) {
  const auto p = MeasureParams::make(1.2, 0.9, 1.5);
  const double tr = testsupport::integrate([&](double t) { return testsupport::naive_kernel(p, t, t); }, 0.0, p.beta);
  EXPECT_NEAR(kernel::trace(p), tr, 1e-13);
}

TEST(Kernel, DefaultTruncationMeetsTolerance) {
  const auto p = MeasureParams::make(1.0, 3.0, 2.0);
  const auto tr = kernel::default_truncation(p, 1e-6);
  EXPECT_FALSE(tr.capped);
  EXPECT_LE(tr.tail_bound, 1e-6 * kernel::trace(p) * (1 + 1e-9));
  EXPECT_GT(kernel::eigen_tail_bound(p, tr.n_max - 1), 1e-6 * kernel::trace(p) * (1 - 1e-6));
  EXPECT_TRUE(kernel::default_truncation(p, 1e-10).capped);
}

TEST(Kernel, IncrementVariance) {
  const auto p = MeasureParams::make(1.1, 1.3, 1.9);
  for (auto [a, b] : {std::pair{0.0, 1e-6}, std::pair{0.2, 0.9}, std::pair{0.0, 1.9}, std::pair{0.5, 0.5}}) {
    const double direct = testsupport::naive_kernel(p, a, a) + testsupport::naive_kernel(p, b, b) -
                          2.0 * testsupport::naive_kernel(p, a, b);
    EXPECT_NEAR(kernel::increment_variance(p, a, b), direct, 1e-14);
    EXPECT_GE(kernel::increment_variance(p, a, b), 0.0);
  }
  EXPECT_NEAR(kernel::increment_variance(p, 0.0, 1e-8), 1e-8 / p.m, 1e-14);
  EXPECT_THROW(kernel::increment_variance(p, 0.9, 0.2), bogo::DomainError);
}

TEST(GridCovariance, ClosedFormsMatchDenseLinearAlgebra) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = testsupport::random_params(rng);
    for (std::size_t N : {1u, 2u, 3u, 5u, 8u, 17u, 32u}) {
      const auto g = kernel::grid_covariance(p, N);
      const Eigen::MatrixXd inv = g.A.inverse();
      EXPECT_LT((g.A_inv - inv).cwiseAbs().maxCoeff() / inv.cwiseAbs().maxCoeff(), 1e-8) << "N=" << N;
      EXPECT_LT(rel_err(g.det_A_inv, 1.0 / g.A.determinant()), 1e-8) << "N=" << N;
      EXPECT_LT(((g.A * g.A_inv) - Eigen::MatrixXd::Identity(g.A.rows(), g.A.cols())).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(GridCovariance, EntriesAreKernelValues) {
  const auto p = MeasureParams::make(0.7, 1.6, 1.2);
  const auto g = kernel::grid_covariance(p, 6);
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t k = 0; k < 6; ++k)
      EXPECT_NEAR(g.A(static_cast<int>(j), static_cast<int>(k)), testsupport::naive_kernel(p, g.times[j], g.times[k]),
                  1e-14);
}

TEST(GridCovariance, OverflowIsReportedNotClamped) {
  const auto p = MeasureParams::make(1.0, 1.0, 1.0);
  const auto g = kernel::grid_covariance(p, 400);
  EXPECT_FALSE(g.warnings.empty());
  EXPECT_TRUE(std::isinf(g.det_A_inv));
  EXPECT_TRUE(std::isfinite(g.log_det_A_inv));
  EXPECT_THROW(kernel::grid_covariance(p, 0), bogo::ParameterError);
}

TEST(GridCovariance, OnePointDensityIntegratesToOne) {
  const auto p = MeasureParams::make(1.0, 1.0, 1.0);
  const auto g = kernel::grid_covariance(p, 1);
  const double sd = std::sqrt(g.A(0, 0));
  const double mass = testsupport::integrate(
      [&](double q) { return std::exp(kernel::marginal_log_density(g, std::span<const double>(&q, 1))); }, -12 * sd,
      12 * sd);
  EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(GridCovariance, TwoPointDensityIsBivariateNormal) {
  const auto p = MeasureParams::make(1.4, 0.6, 1.8);
  const auto g = kernel::grid_covariance(p, 2);
  const double k11 = testsupport::naive_kernel(p, 0, 0), k12 = testsupport::naive_kernel(p, 0, p.beta / 2);
  const double det = k11 * k11 - k12 * k12;
  for (auto [a, b] : {std::pair{0.1, -0.4}, std::pair{1.0, 0.8}, std::pair{0.0, 0.0}}) {
    const double q[2] = {a, b};
    const double expect = -std::log(2 * std::numbers::pi) - 0.5 * std::log(det) -
                          0.5 * (k11 * a * a - 2 * k12 * a * b + k11 * b * b) / det;
    EXPECT_NEAR(kernel::marginal_log_density(g, q), expect, 1e-12);
  }
}
