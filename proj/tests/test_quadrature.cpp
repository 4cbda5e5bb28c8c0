#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <bogo/oracle.hpp>
#include <bogo/quadrature.hpp>

#include "test_support.hpp"

using bogo::MeasureParams;
namespace quad = bogo::quadrature;
namespace fn = bogo::functionals;
using cplx = std::complex<double>;

namespace {

std::vector<double> random_times(std::mt19937_64& rng, double beta, int d) {
  std::uniform_real_distribution<double> u(0.0, beta);
  std::vector<double> t(static_cast<std::size_t>(d));
  for (double& v : t) v = u(rng);
  return t;
}

double wick(const MeasureParams& p, const std::vector<double>& t) {
  return bogo::oracle::wick_moment([&](double a, double b) { return testsupport::naive_kernel(p, a, b); }, t,
                                   {bogo::oracle::wick_hard_cap});
}

}  // namespace

TEST(QnRoots, LowOrdersAndVieta) {
  const auto r1 = quad::qn_roots(1);
  ASSERT_EQ(r1.size(), 1u);
  EXPECT_NEAR(std::abs(r1[0] - cplx(-1.0, 0.0)), 0.0, 1e-15);
  const auto r2 = quad::qn_roots(2);
  EXPECT_NEAR(std::abs(r2[0] - cplx(-0.5, -0.5)), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(r2[1] - cplx(-0.5, 0.5)), 0.0, 1e-14);
  // sum of roots = -1, product = (-1)^n / n!
  const auto r5 = quad::qn_roots(5);
  cplx s = 0.0, prod = 1.0;
  for (cplx z : r5) {
    s += z;
    prod *= z;
  }
  EXPECT_NEAR(std::abs(s + 1.0), 0.0, 1e-13);
  EXPECT_NEAR(std::abs(prod + 1.0 / 120.0), 0.0, 1e-14);
  for (int n = 1; n <= quad::qn_degree_cap; ++n)
    for (cplx z : quad::qn_roots(n)) EXPECT_LT(std::abs(quad::qn_eval(n, z)), 1e-12) << "n=" << n;
  EXPECT_THROW(quad::qn_roots(0), bogo::ParameterError);
  EXPECT_THROW(quad::qn_roots(13), bogo::ParameterError);
}

TEST(ContinuousRho, ReproducesKernel) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    const auto p = testsupport::random_params(rng, 0.4, 3.0);
    const quad::ContinuousRho rho(p);
    std::uniform_real_distribution<double> u(0.0, p.beta);
    for (int i = 0; i < 25; ++i) {
      const double t = u(rng), s = u(rng);
      EXPECT_NEAR(rho.reproduce(t, s), testsupport::naive_kernel(p, t, s), 1e-6 * testsupport::naive_kernel(p, t, s));
    }
  }
}

TEST(ContinuousRho, ClosedFormIntegralsMatchQuadrature) {
  const auto p = MeasureParams::make(0.7, 1.9, 1.4);
  const quad::ContinuousRho rho(p);
  for (double u : {-1.2, -0.3, 0.05, 0.9, 1.4}) {
    const double I = testsupport::integrate([&](double t) { return rho(u, t); }, 0, p.beta, {std::abs(u)});
    EXPECT_NEAR(rho.integral(u), I, 1e-12);
    for (double v : {-0.8, 0.4, 1.1}) {
      const double G = testsupport::integrate([&](double t) { return rho(u, t) * rho(v, t); }, 0, p.beta,
                                              {std::abs(u), std::abs(v)});
      EXPECT_NEAR(rho.gram(u, v), G, 1e-12 * std::max(1.0, std::abs(G)));
    }
  }
  EXPECT_EQ(rho(0.0, 0.3), 0.0);
  EXPECT_THROW(rho(1.5, 0.3), bogo::DomainError);
}

TEST(DiscreteRho, ReproducesTruncatedKernelPerBand) {
  const auto p = MeasureParams::make(1.2, 0.8, 1.6);
  for (auto kind : {quad::BandWeights::geometric, quad::BandWeights::spectral}) {
    const quad::DiscreteRho rho(p, 33, kind);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, p.beta);
    for (int i = 0; i < 100; ++i) {
      const double t = u(rng), s = u(rng);
      // 33 bands carry n = 0, +-1, ..., +-16
      EXPECT_NEAR(rho.reproduce(t, s), testsupport::mercer_kernel(p, t, s, 16), 1e-12);
      EXPECT_NEAR(rho.truncated_kernel(t, s), testsupport::mercer_kernel(p, t, s, 16), 1e-12);
    }
  }
}

TEST(DiscreteRho, ManySpectralBandsApproachFullKernel) {
  const auto p = MeasureParams::make(1, 1, 1);
  const quad::DiscreteRho rho(p, 400001, quad::BandWeights::spectral);
  for (auto [t, s] : {std::pair{0.1, 0.7}, {0.5, 0.5}, {0.0, 0.9}})
    EXPECT_NEAR(rho.reproduce(t, s), testsupport::naive_kernel(p, t, s), 1e-6);
}

TEST(DiscreteRho, EigenIndexOrderAndWeightValidation) {
  EXPECT_EQ(quad::DiscreteRho::eigen_index(1), 0);
  EXPECT_EQ(quad::DiscreteRho::eigen_index(2), 1);
  EXPECT_EQ(quad::DiscreteRho::eigen_index(3), -1);
  EXPECT_EQ(quad::DiscreteRho::eigen_index(4), 2);
  const auto p = MeasureParams::make(1, 1, 1);
  EXPECT_THROW(quad::DiscreteRho(p, std::vector<double>{0.5, 0.5}), bogo::ParameterError);
  EXPECT_THROW(quad::DiscreteRho(p, std::vector<double>{1.0, 0.0}), bogo::ParameterError);
  EXPECT_NO_THROW(quad::DiscreteRho(p, std::vector<double>{0.5, 0.25}));
  // thousands of geometric bands must not underflow into zero weights
  EXPECT_NO_THROW(quad::DiscreteRho(p, 3000));
}

TEST(Thm1, ExactThroughDegreeTwoNPlusOne) {
  std::mt19937_64 rng(21);
  for (int n = 1; n <= 4; ++n) {
    for (int d = 0; d <= 2 * n + 1; ++d) {
      for (int trial = 0; trial < 20; ++trial) {
        const auto p = testsupport::random_params(rng);
        const auto t = random_times(rng, p.beta, d);
        const double w = wick(p, t);
        const quad::ContinuousRho rho(p);
        const auto r = quad::thm1_integrate(rho, fn::monomial(t), n);
        EXPECT_NEAR(r.value.real(), w, 1e-6 * (1 + std::abs(w))) << "n=" << n << " d=" << d;
        EXPECT_NEAR(r.value.imag(), 0.0, 1e-6 * (1 + std::abs(w)));
        EXPECT_EQ(r.method, "factorized");
      }
    }
  }
}

TEST(Thm1, FailsAtDegreeTwoNPlusTwo) {
  const auto p = MeasureParams::make(1, 1, 1);
  const quad::ContinuousRho rho(p);
  for (int n = 1; n <= 3; ++n) {
    const std::vector<double> t(static_cast<std::size_t>(2 * n + 2), 0.3);
    const double w = wick(p, t);
    const auto r = quad::thm1_integrate(rho, fn::monomial(t), n);
    EXPECT_GT(std::abs(r.value - w) / std::abs(w), 1e-3) << "n=" << n;
  }
}

TEST(Thm1, DiscreteRhoIsExactForTruncatedKernel) {
  const auto p = MeasureParams::make(0.9, 1.3, 1.2);
  const quad::DiscreteRho rho(p, 9);
  std::mt19937_64 rng(8);
  for (int d = 2; d <= 5; ++d) {
    const auto t = random_times(rng, p.beta, d);
    const double w = bogo::oracle::wick_moment(
        [&](double a, double b) { return testsupport::mercer_kernel(p, a, b, 4); }, t);
    EXPECT_NEAR(quad::thm1_integrate(rho, fn::monomial(t), 2).value.real(), w, 1e-10 * (1 + std::abs(w)));
  }
}

TEST(Thm1, SquareIntegralProbes) {
  const auto p = MeasureParams::make(1, 1, 1);
  const quad::ContinuousRho rho(p, {.order = 12});
  const auto mono = fn::monomial({0.2, 0.6, 0.6, 0.9});
  // a square-integral probe is expanded into an outer time integral
  const auto mixed = fn::product(fn::monomial({0.2, 0.6}), fn::time_square_integral());
  const auto r = quad::thm1_integrate(rho, mixed, 2);
  EXPECT_EQ(r.method, "square_expansion");
  const double B02 = testsupport::naive_kernel(p, 0.2, 0.6);
  const double B2 = testsupport::integrate(
      [&](double u) { return testsupport::naive_kernel(p, 0.2, u) * testsupport::naive_kernel(p, u, 0.6); }, 0, 1,
      {0.2, 0.6});
  const double exact = bogo::kernel::trace(p) * B02 + 2 * B2;
  EXPECT_NEAR(r.value.real(), exact, 1e-8);
  EXPECT_NEAR(quad::thm1_integrate(rho, mono, 2).value.real(), wick(p, {0.2, 0.6, 0.6, 0.9}), 1e-10);
}

TEST(Thm1, ComplexNodesRejectNonPolynomial) {
  const auto p = MeasureParams::make(1, 1, 1);
  const quad::ContinuousRho rho(p);
  EXPECT_THROW(quad::thm1_integrate(rho, fn::exp_linear(0.5), 2), bogo::UnsupportedFunctional);
  // n = 1 has a real node and accepts any functional
  const auto r = quad::thm1_integrate(rho, fn::exp_linear(0.5), 1);
  EXPECT_EQ(r.method, "tensor");
  EXPECT_NEAR(r.value.real(), std::cosh(0.5 * std::sqrt(p.beta / p.m) / p.omega), 1e-14);
}

TEST(Thm2, ExactThroughDegreeTwoNPlusOne) {
  std::mt19937_64 rng(33);
  for (int n = 1; n <= 3; ++n) {
    for (double dA : {-0.5, 0.0, 1.7}) {
      const double A = n + dA;
      for (int d = 0; d <= 2 * n + 1; ++d) {
        for (int trial = 0; trial < 20; ++trial) {
          const auto p = testsupport::random_params(rng);
          const auto t = random_times(rng, p.beta, d);
          const double w = wick(p, t);
          const quad::ContinuousRho rho(p);
          const double v = quad::thm2_integrate(rho, fn::monomial(t), n, A).value.real();
          EXPECT_NEAR(v, w, 1e-6 * (1 + std::abs(w))) << "n=" << n << " A=" << A << " d=" << d;
        }
      }
    }
  }
}

TEST(Thm2, RejectsSmallA) {
  const auto p = MeasureParams::make(1, 1, 1);
  const quad::ContinuousRho rho(p);
  EXPECT_THROW(quad::thm2_integrate(rho, fn::monomial({0.1}), 3, 2.0), bogo::DomainError);
}

TEST(InFamily, RecursionMatchesDirectForm) {
  const auto p = MeasureParams::make(1.1, 0.9, 1.3);
  const quad::ContinuousRho rho(p);
  const auto F = fn::integral_power(2);
  const double exact = p.beta / (p.m * p.omega * p.omega);
  for (int n = 1; n <= 4; ++n) {
    for (auto s : {quad::Scaling::eq31, quad::Scaling::inv_sqrt_factorial}) {
      const double d = quad::in_direct(rho, F, n, s), r = quad::in_recursive(rho, F, n, s);
      EXPECT_NEAR(d, r, 1e-10 * std::abs(d)) << n;
    }
    EXPECT_NEAR(quad::in_direct(rho, F, n), exact, 1e-10 * exact);
  }
}

TEST(InFamily, FactorialScalingIsInexactFromThree) {
  const auto p = MeasureParams::make(1, 1, 1);
  const quad::ContinuousRho rho(p);
  const auto F = fn::integral_power(2);
  const double exact = p.beta / (p.m * p.omega * p.omega);
  for (int n = 1; n <= 2; ++n)
    EXPECT_NEAR(quad::in_direct(rho, F, n, quad::Scaling::inv_sqrt_factorial), exact, 1e-10);
  EXPECT_GT(std::abs(quad::in_direct(rho, F, 3, quad::Scaling::inv_sqrt_factorial) - exact), 1e-3);
}

TEST(Thm3, SquareWeightExample) {
  const auto p = MeasureParams::make(1, 1, 1);
  const auto rule = quad::thm3_square_weight_rule(p, 100000);
  const double tr = bogo::kernel::trace(p);
  EXPECT_NEAR(quad::eigen_rule_integrate(rule, fn::constant(1.0)), tr, 1e-14);
  // int (int x^2) x(t) x(s) dmu = TrB B(t,s) + 2 B^2(t,s)
  for (auto [t, s] : {std::pair{0.2, 0.7}, {0.5, 0.5}}) {
    const double B2 = testsupport::integrate(
        [&](double u) { return testsupport::naive_kernel(p, t, u) * testsupport::naive_kernel(p, u, s); }, 0, 1,
        {t, s});
    const double exact = tr * testsupport::naive_kernel(p, t, s) + 2 * B2;
    EXPECT_NEAR(quad::eigen_rule_integrate(rule, fn::monomial({t, s})), exact, 1e-5 * exact);
  }
  // odd degrees vanish by symmetry
  EXPECT_EQ(quad::eigen_rule_integrate(rule, fn::monomial({0.1, 0.4, 0.8})), 0.0);
}

TEST(Thm4, ConstantsAndClosedFormA) {
  for (auto p : {MeasureParams::make(1, 1, 1), MeasureParams::make(2, 0.5, 3), MeasureParams::make(0.6, 2.5, 0.7)}) {
    const auto c = quad::thm4_constants(p, 100000);
    const double tr = bogo::kernel::trace(p);
    EXPECT_NEAR(c.TrB, tr, 1e-14 * tr);
    std::vector<double> a;
    for (std::size_t i = 0; i < c.k.size(); ++i) {
      const double l = bogo::kernel::eigenvalue(p, c.k[i]);
      EXPECT_NEAR(c.Ak[i], l / (tr + 2 * l), 1e-14);
      EXPECT_NEAR(c.Bk[i], tr + 2 * l, 1e-14);
      a.push_back(c.Ak[i]);
    }
    EXPECT_NEAR(bogo::numerics::pairwise_sum(a), c.A, 1e-4);
  }
}

TEST(Thm4, ExactForDegreeThreeAndVTimesQuadratic) {
  const auto p = MeasureParams::make(0.8, 1.4, 1.1);
  const long K = 200;
  const auto rule = quad::thm4_rule(p, K);
  auto Bk = [&](double t, double s) { return testsupport::mercer_kernel(p, t, s, K); };
  EXPECT_NEAR(quad::eigen_rule_integrate(rule, fn::constant(2.5)), 2.5, 1e-14);
  EXPECT_NEAR(quad::eigen_rule_integrate(rule, fn::monomial({0.3, 0.9})), Bk(0.3, 0.9), 1e-12);
  EXPECT_NEAR(quad::eigen_rule_integrate(rule, fn::monomial({0.3, 0.9, 0.1})), 0.0, 1e-15);
  // V p2 with V = int x^2 and p2 = x(t) x(s): sum (TrB_K lambda + 2 lambda^2) phi phi
  double exact = 0;
  for (long k = -K; k <= K; ++k) {
    const double l = bogo::kernel::eigenvalue(p, k);
    const bogo::kernel::EigenPair e{k, l, p.beta};
    exact += (bogo::kernel::trace(p) * l + 2 * l * l) * e.phi(0.3) * e.phi(0.9);
  }
  const auto F = fn::product(fn::time_square_integral(), fn::monomial({0.3, 0.9}));
  EXPECT_NEAR(quad::eigen_rule_integrate(rule, F), exact, 1e-12);
}
