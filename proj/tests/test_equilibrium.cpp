#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <bogo/equilibrium.hpp>

#include "test_support.hpp"

using bogo::MeasureParams;
namespace eq = bogo::equilibrium;
namespace pot = bogo::potentials;
namespace sampler = bogo::sampler;

namespace {
sampler::SamplingOptions opts(std::size_t n, std::uint64_t seed, std::size_t grid = 64) {
  sampler::SamplingOptions o;
  o.n_paths = n;
  o.seed = seed;
  o.grid = grid;
  return o;
}
}  // namespace

TEST(FalkBruch, UnitParametersAndIdentity) {
  const auto f = eq::falk_bruch_bound(MeasureParams::make(1, 1, 1));
  EXPECT_DOUBLE_EQ(f.b0, 1.0);
  EXPECT_DOUBLE_EQ(f.c0, 1.0);
  EXPECT_NEAR(f.g0, 0.5 / std::tanh(0.5), 1e-15);
  std::mt19937_64 rng(10);
  for (int i = 0; i < 100; ++i) EXPECT_LT(eq::falk_bruch_bound(testsupport::random_params(rng, 0.1, 5)).identity_error, 1e-12);
  const auto cold = eq::falk_bruch_bound(MeasureParams::make(1.5, 2.0, 60));
  EXPECT_NEAR(cold.g0, 1 / (2 * 1.5 * 2.0), 1e-12);
}

TEST(RofH, ZeroPotentialIsNormalized) {
  const auto p = MeasureParams::make(1, 1, 1);
  const auto r = eq::domination_check(p, pot::zero(), {0.0, 0.5, 1.0}, opts(50000, 1));
  EXPECT_EQ(r.R0.estimate, 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(r.R_estimates[k].estimate, 1.0);
    EXPECT_NEAR(r.R_shifted[k].estimate, 1.0, 4 * r.R_shifted[k].std_error + 1e-12);
    EXPECT_TRUE(r.bound_ok[k]);
  }
  // h = 0: both forms are the same numbers
  EXPECT_EQ(r.R_shifted[0].estimate, r.R_estimates[0].estimate);
}

TEST(RofH, QuarticDirectAndShiftedAgree) {
  const auto p = MeasureParams::make(1, 1, 1);
  for (double h : {0.25, 0.5}) {
    const auto r = eq::R_of_h(p, pot::quartic(1.0), h, opts(200000, 7));
    EXPECT_NEAR(r.direct.estimate, r.shifted.estimate, 4 * std::hypot(r.direct.std_error, r.shifted.std_error)) << h;
  }
}

TEST(RofH, RejectsInvalidPotential) {
  const auto p = MeasureParams::make(1, 1, 1);
  bogo::Potential odd{"odd", 1, 0, false, [](double x) { return x * x * x; }};
  EXPECT_THROW(eq::R_of_h(p, odd, 0.5, opts(10, 1)), bogo::ParameterError);
  EXPECT_THROW(eq::R_of_h(p, pot::quadratic(-1), 0.5, opts(10, 1)), bogo::ParameterError);
}

TEST(Domination, QuarticSatisfiesBound) {
  const auto p = MeasureParams::make(1, 1, 1);
  const auto r = eq::domination_check(p, pot::quartic(1.0), {0.25, 0.5, 1.0}, opts(200000, 3));
  EXPECT_TRUE(r.all_ok());
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LT(r.paired_diff[k].estimate, 0.0);
  EXPECT_TRUE(r.monotone_in_h);
}

TEST(MeanSquareQ, FreeQuarticAndStrongCoupling) {
  const auto p = MeasureParams::make(1, 1, 1);
  const double bound = 0.5 / std::tanh(0.5);
  const auto free = eq::mean_square_q(p, pot::zero(), opts(200000, 4));
  EXPECT_NEAR(free.estimate, bound, 4 * free.std_error);
  const auto avg = eq::mean_square_q(p, pot::zero(), opts(200000, 4), true);
  EXPECT_NEAR(avg.estimate, bound, 4 * avg.std_error);
  EXPECT_LT(avg.std_error, free.std_error);
  const auto q = eq::mean_square_q(p, pot::quartic(1.0), opts(200000, 5));
  EXPECT_LE(q.estimate, bound + 4 * q.std_error);
  const auto strong = eq::mean_square_q(p, pot::quartic(100.0), opts(200000, 6));
  EXPECT_LT(strong.estimate + 4 * strong.std_error, 0.5 * bound);
}

TEST(ShiftIdentity, GaussianMgf) {
  const auto p = MeasureParams::make(1.2, 0.9, 1.4);
  sampler::SamplingOptions o = opts(100000, 9);
  o.method = sampler::Method::kl;
  o.modes = 8;
  for (double th : {-1.0, -0.5, 0.5, 1.0}) {
    const auto r = sampler::estimate(p, bogo::functionals::exp_linear(th), o);
    EXPECT_NEAR(r.estimate, std::exp(th * th * p.beta / (2 * p.stiffness())), 4 * r.std_error) << th;
  }
}

TEST(ShiftIdentity, RandomBoundedFunctionals) {
  const auto p = MeasureParams::make(1, 1, 1);
  sampler::SamplingOptions o = opts(50000, 13);
  o.method = sampler::Method::kl;
  o.modes = 32;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const double t1 = u(rng), t2 = u(rng), a = 0.2 + u(rng), b = 0.5 + 2 * u(rng), h = 2 * u(rng) - 1;
    auto F = [&](double x1, double x2) { return std::exp(-a * x1 * x1) * std::cos(b * x2); };
    o.stream = static_cast<std::uint64_t>(trial);
    const auto s = sampler::simulate_kl_coefficients(
        p, o, 2, [&](std::size_t, const sampler::KLPath& x, std::span<double> row) {
          const double x1 = x.probe({bogo::ProbeKind::point, t1}), x2 = x.probe({bogo::ProbeKind::point, t2});
          row[0] = F(x1 + h, x2 + h);
          row[1] = F(x1, x2) * eq::shift_weight(p, h, x.probe({bogo::ProbeKind::integral, 0}));
        });
    const auto d = sampler::column_report(s, 0, o), w = sampler::column_report(s, 1, o);
    EXPECT_NEAR(d.estimate, w.estimate, 4 * std::hypot(d.std_error, w.std_error)) << trial;
  }
}
