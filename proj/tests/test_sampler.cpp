#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <bogo/oracle.hpp>
#include <bogo/sampler.hpp>

#include "test_support.hpp"

using bogo::MeasureParams;
namespace sampler = bogo::sampler;
namespace fn = bogo::functionals;

TEST(FiniteSampler, FactorizationsReproduceGridCovariance) {
  const auto p = MeasureParams::make(1.3, 0.9, 1.7);
  for (std::size_t N : {1u, 2u, 3u, 4u, 7u, 16u, 64u}) {
    const auto g = bogo::kernel::grid_covariance(p, N);
    for (auto f : {sampler::Factorization::precision_cholesky, sampler::Factorization::dense_cholesky}) {
      const sampler::FiniteSampler s(p, N, f);
      const double err = (s.implied_covariance() - g.A).cwiseAbs().maxCoeff() / g.A.cwiseAbs().maxCoeff();
      EXPECT_LT(err, 1e-12) << "N=" << N;
    }
  }
}

TEST(FiniteSampler, LargeGridStaysPositive) {
  const auto p = MeasureParams::make(1, 1, 1);
  const sampler::FiniteSampler s(p, 1 << 14);
  auto rng = bogo::path_stream(1, 0, 0);
  const auto path = s.sample(rng);
  for (double v : path.values) ASSERT_TRUE(std::isfinite(v));
  EXPECT_EQ(path.values.front(), path.values.back());
}

TEST(FiniteSampler, EmpiricalCovariance) {
  const auto p = MeasureParams::make(0.8, 1.2, 1.5);
  const std::size_t N = 8, n = 40000;
  const auto paths = sampler::sample_finite(p, N, n, 7);
  for (std::size_t j : {0u, 1u, 4u}) {
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = paths[i].values[0] * paths[i].values[j];
    const auto st = bogo::numerics::mean_stat(prod);
    EXPECT_NEAR(st.mean, testsupport::naive_kernel(p, 0, paths[0].time(j)), 5 * st.std_error);
  }
}

TEST(KLSampler, GridSynthesisMatchesCoefficientView) {
  const auto p = MeasureParams::make(1, 1, 1);
  const sampler::KLSampler s(p, 40, 32);
  Eigen::MatrixXd C(static_cast<Eigen::Index>(s.dim()), 1), X;
  auto rng = bogo::path_stream(3, 0, 0);
  s.draw_coefficients(rng, std::span<double>(C.data(), s.dim()));
  s.synthesize(C, X);
  const auto view = s.view(std::span<const double>(C.data(), s.dim()));
  for (std::size_t j = 0; j <= 32; j += 5)
    EXPECT_NEAR(X(static_cast<Eigen::Index>(j), 0), view.probe({bogo::ProbeKind::point, j / 32.0}), 1e-13);
}

TEST(KLSampler, EmpiricalCovarianceMatchesTruncatedKernel) {
  const auto p = MeasureParams::make(1.1, 0.7, 1.3);
  const auto paths = sampler::sample_kl(p, 16, 8, 30000, 5);
  std::vector<double> prod(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) prod[i] = paths[i].values[1] * paths[i].values[3];
  const auto st = bogo::numerics::mean_stat(prod);
  EXPECT_NEAR(st.mean, bogo::kernel::truncated_covariance(p, paths[0].time(1), paths[0].time(3), 16),
              5 * st.std_error);
}

TEST(Estimate, ExpQuadraticBothMethods) {
  const auto p = MeasureParams::make(1, 1, 1);
  const double exact = bogo::oracle::exp_quadratic(p, 0.5);
  for (auto m : {sampler::Method::finite_dim, sampler::Method::kl}) {
    sampler::SamplingOptions o;
    o.method = m;
    o.n_paths = 20000;
    o.seed = 99;
    o.grid = 128;
    o.modes = 256;
    const auto r = sampler::estimate(p, fn::exp_quadratic(0.5), o);
    EXPECT_NEAR(r.estimate, exact, 4 * r.std_error) << sampler::to_string(m);
    EXPECT_EQ(r.n_samples, 20000u);
  }
}

TEST(Estimate, ThreadCountDoesNotChangeResult) {
  const auto p = MeasureParams::make(1.2, 0.8, 1.1);
  for (auto m : {sampler::Method::finite_dim, sampler::Method::kl}) {
    sampler::SamplingOptions o;
    o.method = m;
    o.n_paths = 3000;
    o.seed = 5;
    o.grid = 32;
    o.modes = 32;
    o.chunk = 100;
    const auto F = fn::monomial({0.1, 0.6});
    o.threads = 1;
    const auto a = sampler::estimate(p, F, o);
    o.threads = 4;
    const auto b = sampler::estimate(p, F, o);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.std_error, b.std_error);
  }
}

TEST(Estimate, SeedsSelectStreams) {
  const auto p = MeasureParams::make(1, 1, 1);
  sampler::SamplingOptions o;
  o.n_paths = 500;
  o.grid = 16;
  o.seed = 1;
  const auto a = sampler::estimate(p, fn::time_square_integral(), o);
  const auto b = sampler::estimate(p, fn::time_square_integral(), o);
  o.seed = 2;
  const auto c = sampler::estimate(p, fn::time_square_integral(), o);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_NE(a.estimate, c.estimate);
}

TEST(Estimate, StandardErrorDecaysAsInverseSqrt) {
  const auto p = MeasureParams::make(1, 1, 1);
  std::vector<double> lx, ly;
  for (std::size_t n : {100u, 1000u, 10000u, 100000u}) {
    sampler::SamplingOptions o;
    o.n_paths = n;
    o.grid = 8;
    o.seed = 17;
    const auto r = sampler::estimate(p, fn::monomial({0.0, 0.0}), o);
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(r.std_error));
  }
  const double mx = (lx[0] + lx[1] + lx[2] + lx[3]) / 4, my = (ly[0] + ly[1] + ly[2] + ly[3]) / 4;
  double sxy = 0, sxx = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  EXPECT_NEAR(sxy / sxx, -0.5, 0.05);
}

TEST(Estimate, NonFiniteDrawsAreCountedOrAbort) {
  const auto p = MeasureParams::make(1, 1, 1);
  sampler::SamplingOptions o;
  o.n_paths = 10000;
  o.grid = 8;
  o.seed = 3;
  // NaN on exactly every 2000th path: 5 of 10000 is under the 0.1% limit
  auto few = sampler::simulate_paths(
      p, o, 1, [](std::size_t, const bogo::PathSample& x, std::span<double> row) { row[0] = x.values[0]; });
  for (std::size_t i = 0; i < few.rows; i += 2000) few.data[i] = std::numeric_limits<double>::quiet_NaN();
  const auto r = sampler::column_report(few, 0, o);
  EXPECT_EQ(r.n_nonfinite, 5u);
  EXPECT_EQ(r.n_samples, 9995u);
  for (std::size_t i = 0; i < few.rows; i += 500) few.data[i] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(sampler::column_report(few, 0, o), bogo::NumericalError);
}

TEST(Estimate, RatioEstimator) {
  sampler::SampleMatrix s(4000, 2);
  for (std::size_t i = 0; i < s.rows; ++i) {
    const double y = 1.0 + 0.5 * std::sin(static_cast<double>(i));
    s.row(i)[0] = 3.0 * y;
    s.row(i)[1] = y;
  }
  const auto r = sampler::ratio_report(s, 0, 1, {});
  EXPECT_NEAR(r.estimate, 3.0, 1e-12);
  EXPECT_NEAR(r.std_error, 0.0, 1e-12);
}

TEST(Functional, ProductAndDegree) {
  const auto F = fn::product(fn::time_square_integral(), fn::monomial({0.1, 0.2}));
  EXPECT_EQ(F.degree(), 4);
  EXPECT_TRUE(F.is_polynomial());
  EXPECT_FALSE(fn::exp_linear(1.0).is_polynomial());
  EXPECT_THROW(fn::product(fn::exp_linear(1.0), F), bogo::UnsupportedFunctional);
}
