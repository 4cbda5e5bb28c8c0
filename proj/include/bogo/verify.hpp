#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dynamics.hpp"
#include "equilibrium.hpp"
#include "json_io.hpp"
#include "kernel.hpp"
#include "oracle.hpp"
#include "potential.hpp"
#include "quadrature.hpp"
#include "reference.hpp"
#include "sampler.hpp"
#include "trajectories.hpp"

/**
 * Oracle-versus-implementation acceptance suite. Every criterion draws its
 * randomness from (seed, criterion id), and reports carry no timings, so a
 * report is a pure function of (quick, seed).
 */
namespace bogo::verify {

using json = nlohmann::json;

struct VerifyOptions {
  bool quick = false;
  std::uint64_t seed = 20251015;
  unsigned threads = 0;  ///< 0: BOGO_THREADS, else 1
  std::vector<int> only; ///< empty: all criteria
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  json metrics;
};

inline void to_json(json& j, const CriterionResult& r) {
  j = {{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"metrics", r.metrics}};
}

struct VerifyReport {
  bool quick = false;
  std::uint64_t seed = 0;
  std::vector<CriterionResult> results;

  bool all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.passed; });
  }
};

inline void to_json(json& j, const VerifyReport& r) {
  j = {{"mode", r.quick ? "quick" : "full"}, {"seed", r.seed}, {"all_passed", r.all_passed()}, {"criteria", r.results}};
}

namespace detail {

inline sampler::SamplingOptions mc(const VerifyOptions& v, std::uint64_t stream, std::size_t n_paths,
                                   std::size_t grid) {
  sampler::SamplingOptions o;
  o.seed = v.seed;
  o.stream = stream;
  o.n_paths = n_paths;
  o.grid = grid;
  o.threads = v.threads;
  return o;
}

inline std::mt19937_64 rng_for(const VerifyOptions& v, int id) {
  std::seed_seq s{static_cast<std::uint32_t>(v.seed), static_cast<std::uint32_t>(v.seed >> 32),
                  static_cast<std::uint32_t>(id)};
  return std::mt19937_64(s);
}

inline MeasureParams random_params(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  const double m = u(rng), w = u(rng), b = u(rng);
  return MeasureParams::make(m, w, b);
}

inline double grid_time(const MeasureParams& p, std::size_t grid, std::size_t j) {
  return p.beta * static_cast<double>(j) / static_cast<double>(grid);
}

inline double within_sigmas(double a, double b, double se) { return se > 0.0 ? std::abs(a - b) / se : 0.0; }

}  // namespace detail

/// Grid covariance inverse and determinant against dense LU, 50 random triples, N <= 32.
inline CriterionResult criterion_grid_closed_forms(const VerifyOptions& v) {
  auto rng = detail::rng_for(v, 1);
  double worst_inv = 0.0, worst_det = 0.0;
  const std::vector<std::size_t> sizes{1, 2, 3, 4, 5, 8, 13, 16, 31, 32};
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = detail::random_params(rng, 0.5, 2.0);
    for (std::size_t N : sizes) {
      const auto g = kernel::grid_covariance(p, N);
      // oracle: A from the covariance formula, inverted numerically
      Eigen::MatrixXd A(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t k = 0; k < N; ++k)
          A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = kernel::covariance(p, g.times[j], g.times[k]);
      const Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
      const Eigen::MatrixXd inv = lu.inverse();
      worst_inv = std::max(worst_inv, (inv - g.A_inv).cwiseAbs().maxCoeff() / inv.cwiseAbs().maxCoeff());
      const double det_inv = 1.0 / lu.determinant();
      worst_det = std::max(worst_det, std::abs(g.det_A_inv - det_inv) / std::abs(det_inv));
    }
  }
  CriterionResult r{1, "grid covariance closed forms vs dense linear algebra", false, {}};
  r.passed = worst_inv <= 1e-8 && worst_det <= 1e-8;
  r.metrics = {{"triples", 50}, {"sizes", sizes}, {"max_rel_err_inverse", worst_inv},
               {"max_rel_err_det_inverse", worst_det}, {"tolerance", 1e-8}};
  return r;
}

/// Exponential-quadratic integral: closed form, eigen-product, Monte Carlo over KL paths.
inline CriterionResult criterion_exp_quadratic(const VerifyOptions& v) {
  const auto p = MeasureParams::make(1, 1, 1);
  const double lambda = 0.5;
  const double closed = oracle::exp_quadratic(p, lambda);
  const long n_max = 100000;
  const auto plain = oracle::fredholm_det_truncated(p, lambda, n_max);
  const auto corrected = oracle::fredholm_det_tail_corrected(p, lambda, n_max);
  const double product_value = 1.0 / std::sqrt(corrected.value);
  const double product_err = std::abs(product_value - closed) / closed;
  auto o = detail::mc(v, 2, v.quick ? 100000 : 1000000, 0);
  o.method = sampler::Method::kl;
  o.modes = v.quick ? 128 : 512;
  const auto est = sampler::estimate(p, functionals::exp_quadratic(lambda), o);
  const double z = detail::within_sigmas(est.estimate, closed, est.std_error);
  CriterionResult r{2, "exp-quadratic closed form vs eigen-product vs KL Monte Carlo", false, {}};
  r.passed = product_err <= 1e-8 && z <= 3.0;
  r.metrics = {{"lambda", lambda},
               {"closed_form", closed},
               {"truncation", n_max},
               {"product_tail_corrected", product_value},
               {"product_rel_err", product_err},
               {"product_plain", 1.0 / std::sqrt(plain.value)},
               {"product_plain_rel_err", std::abs(1.0 / std::sqrt(plain.value) - closed) / closed},
               {"mc", est},
               {"kl_modes", o.modes},
               {"mc_sigmas", z}};
  return r;
}

/// Theorem 1 (n = 1, 2) and Theorem 2 (n <= 3, A = n + 1) against Wick moments.
inline CriterionResult criterion_quadrature_exactness(const VerifyOptions& v) {
  auto rng = detail::rng_for(v, 3);
  json rows = json::array();
  double worst = 0.0;
  auto run = [&](const std::string& rule, int n, double A) {
    double w_max = 0.0;
    for (int d = 0; d <= 2 * n + 1; ++d) {
      for (int trial = 0; trial < 20; ++trial) {
        const auto p = detail::random_params(rng, 0.5, 2.0);
        std::uniform_real_distribution<double> u(0.0, p.beta);
        std::vector<double> t(static_cast<std::size_t>(d));
        for (double& x : t) x = u(rng);
        const double w = oracle::wick_moment(p, t, {oracle::wick_hard_cap});
        const quadrature::ContinuousRho rho(p);
        const auto F = functionals::monomial(t);
        const auto q = rule == "thm1" ? quadrature::thm1_integrate(rho, F, n) : quadrature::thm2_integrate(rho, F, n, A);
        // odd moments vanish; measure them on the natural scale B(0,0)^{d/2}
        const double scale = std::max(std::abs(w), std::pow(kernel::variance(p), 0.5 * d));
        w_max = std::max(w_max, std::abs(q.value - w) / scale);
      }
    }
    rows.push_back({{"rule", rule}, {"n", n}, {"A", A}, {"max_degree", 2 * n + 1}, {"max_rel_err", w_max}});
    worst = std::max(worst, w_max);
  };
  run("thm1", 1, 0.0);
  run("thm1", 2, 0.0);
  for (int n = 1; n <= 3; ++n) run("thm2", n, n + 1.0);
  CriterionResult r{3, "Theorem 1 and 2 exactness on monomials", false, {}};
  r.passed = worst <= 1e-6;
  r.metrics = {{"tuples_per_degree", 20}, {"rules", rows}, {"max_rel_err", worst}, {"tolerance", 1e-6}};
  return r;
}

/// rho-factorization of B: continuous rho by u-quadrature; discrete rho band by band.
inline CriterionResult criterion_rho_factorization(const VerifyOptions& v) {
  auto rng = detail::rng_for(v, 4);
  double worst_cont = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto p = detail::random_params(rng, 0.5, 2.0);
    const quadrature::ContinuousRho rho(p);
    std::uniform_real_distribution<double> u(0.0, p.beta);
    const double t = u(rng), s = u(rng), b = kernel::covariance(p, t, s);
    worst_cont = std::max(worst_cont, std::abs(rho.reproduce(t, s) - b) / b);
  }
  double worst_disc = 0.0;
  const auto p = detail::random_params(rng, 0.5, 2.0);
  std::uniform_real_distribution<double> u(0.0, p.beta);
  for (auto kind : {quadrature::BandWeights::geometric, quadrature::BandWeights::spectral})
    for (std::size_t bands = 1; bands <= 33; bands += 2) {
      const quadrature::DiscreteRho rho(p, bands, kind);
      for (int i = 0; i < 20; ++i) {
        const double t = u(rng), s = u(rng);
        const double ref = kernel::truncated_covariance(p, t, s, static_cast<long>(bands / 2));
        worst_disc = std::max(worst_disc, std::abs(rho.reproduce(t, s) - ref));
      }
    }
  CriterionResult r{4, "rho-factorization of the covariance", false, {}};
  r.passed = worst_cont <= 1e-6 && worst_disc <= 1e-12;
  r.metrics = {{"continuous_points", 100},     {"continuous_max_rel_err", worst_cont},
               {"continuous_tolerance", 1e-6}, {"discrete_band_counts", "1,3,...,33 (geometric and spectral)"},
               {"discrete_max_abs_err", worst_disc}, {"discrete_tolerance", 1e-12}};
  return r;
}

/// Quadratic-variation mean and I_N against Monte Carlo; N I_N trend in closed form.
inline CriterionResult criterion_qvar(const VerifyOptions& v) {
  const auto p = MeasureParams::make(1, 1, 1);
  const std::size_t N = 64;
  const auto rep = trajectories::qvar_report(p, N, detail::mc(v, 5, v.quick ? 20000 : 100000, N));
  const double z_mean = detail::within_sigmas(rep.sample_mean, rep.exact_mean, rep.sample_mean_se);
  const double z_in = detail::within_sigmas(rep.sample_I_N, rep.exact_I_N, rep.sample_I_N_se);
  const double target = 2.0 * p.beta * p.beta / (p.m * p.m);
  json trend = json::array();
  double worst = 0.0;
  for (int e = 10; e <= 14; ++e) {
    const std::size_t n = std::size_t{1} << e;
    const double closed = static_cast<double>(n) * trajectories::qvar_exact_I_N(p, n);
    const double stable = static_cast<double>(n) * trajectories::qvar_I_N_stable(p, n);
    const double rel = std::abs(closed - target) / target;
    worst = std::max(worst, rel);
    trend.push_back({{"N", n}, {"N_I_N_closed", closed}, {"N_I_N_stable", stable}, {"rel_dev", rel}});
  }
  CriterionResult r{5, "quadratic variation statistics", false, {}};
  r.passed = z_mean <= 4.0 && z_in <= 4.0 && worst <= 0.05;
  r.metrics = {{"mc", rep},         {"mean_sigmas", z_mean}, {"I_N_sigmas", z_in}, {"target_2beta2_over_m2", target},
               {"trend", trend},    {"trend_max_rel_dev", worst}, {"trend_tolerance", 0.05}};
  return r;
}

/// y-transform: disjoint increments uncorrelated, increment variance (t - s)/(m omega^2).
inline CriterionResult criterion_independent_increments(const VerifyOptions& v) {
  const auto p = MeasureParams::make(1, 1, 1);
  const std::size_t grid = 256;
  const std::vector<std::size_t> cuts{0, 26, 77, 115, 179, 256};
  const std::size_t k = cuts.size() - 1;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) pairs.emplace_back(a, b);
  const auto o = detail::mc(v, 6, v.quick ? 20000 : 100000, grid);
  const auto s = sampler::simulate_paths(p, o, pairs.size() + k, [&](std::size_t, const PathSample& x, std::span<double> row) {
    const auto y = dynamics::transform_y(x, p);
    std::vector<double> inc(k);
    for (std::size_t i = 0; i < k; ++i) inc[i] = y.y_values[cuts[i + 1]] - y.y_values[cuts[i]];
    for (std::size_t q = 0; q < pairs.size(); ++q) row[q] = inc[pairs[q].first] * inc[pairs[q].second];
    for (std::size_t i = 0; i < k; ++i) row[pairs.size() + i] = inc[i] * inc[i];
  });
  bool ok = true;
  json cov = json::array(), var = json::array();
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    const auto e = sampler::column_report(s, q, o);
    const double z = detail::within_sigmas(e.estimate, 0.0, e.std_error);
    ok = ok && z <= 4.0;
    cov.push_back({{"first", pairs[q].first}, {"second", pairs[q].second}, {"estimate", e.estimate},
                   {"std_error", e.std_error}, {"sigmas", z}});
  }
  for (std::size_t i = 0; i < k; ++i) {
    const auto e = sampler::column_report(s, pairs.size() + i, o);
    const double dt = detail::grid_time(p, grid, cuts[i + 1]) - detail::grid_time(p, grid, cuts[i]);
    const double exact = dt / p.stiffness();
    const double z = detail::within_sigmas(e.estimate, exact, e.std_error);
    ok = ok && z <= 4.0;
    var.push_back({{"t0", detail::grid_time(p, grid, cuts[i])}, {"t1", detail::grid_time(p, grid, cuts[i + 1])}, {"estimate", e.estimate},
                   {"std_error", e.std_error}, {"exact", exact}, {"sigmas", z}});
  }
  CriterionResult r{6, "independent increments of the y-transform", false, {}};
  r.passed = ok;
  r.metrics = {{"grid", grid}, {"n_paths", o.n_paths}, {"disjoint_pairs", cov}, {"increment_variances", var}};
  return r;
}

/// Feynman-Kac: Volterra vs free kernel and mollified MC; quadratic V vs finite differences.
inline CriterionResult criterion_feynman_kac(const VerifyOptions& v) {
  const auto p = MeasureParams::make(1, 1, 1);
  const double M = p.stiffness();
  dynamics::FKOptions fo;
  fo.n_beta = 100;
  fo.n_xi = 101;
  fo.threads = v.threads;
  const auto zero = dynamics::fk_solve_volterra(p, potentials::zero(), fo);
  double worst_free = 0.0;
  for (std::size_t i = 0; i < zero.beta_grid.size(); ++i)
    for (std::size_t j = 0; j < zero.xi_grid.size(); ++j) {
      const double f = dynamics::fk_free(p, zero.beta_grid[i], zero.xi_grid[j]);
      worst_free = std::max(worst_free, std::abs(zero.u(i, j) - f) / f);
    }

  const double eps = 0.02;
  const std::vector<double> xi{-1.0, -0.4, 0.0, 0.5, 1.2};
  const auto o = detail::mc(v, 7, v.quick ? 20000 : 100000, 256);
  const auto mc = dynamics::fk_estimate_mc(p, potentials::zero(), 1.0, xi, eps, o);
  bool mc_ok = true;
  json mc_rows = json::array();
  for (std::size_t k = 0; k < xi.size(); ++k) {
    // the mollified target is exact for V = 0: the free kernel at beta + M eps^2
    const double target = dynamics::fk_free(p, 1.0 + M * eps * eps, xi[k]);
    const double z = detail::within_sigmas(mc[k].estimate, target, mc[k].std_error);
    mc_ok = mc_ok && z <= 4.0;
    mc_rows.push_back({{"xi", xi[k]}, {"mc", mc[k]}, {"mollified_exact", target},
                       {"unmollified_exact", dynamics::fk_free(p, 1.0, xi[k])}, {"sigmas", z}});
  }

  const double kappa = 1.0;
  fo.n_beta = 200;
  fo.n_xi = 241;
  const auto sol = dynamics::fk_solve_volterra(p, potentials::quadratic(kappa), fo);
  const double beta0 = 0.05, L = 8.0;
  const std::size_t nx = 3201;
  const auto fd = reference::diffusion_fd(
      M, [&](double x) { return 0.5 * kappa * x * x; },
      [&](double x) { return reference::mehler_kernel(M, kappa, beta0, x); }, beta0, 1.0, L, nx, 4000);
  const std::size_t last = sol.beta_grid.size() - 1;
  double worst_fd = 0.0, worst_mehler = 0.0;
  json fd_rows = json::array();
  for (double x : {-2.0, -1.0, 0.0, 0.5, 1.5}) {
    const std::size_t j = static_cast<std::size_t>(std::lround((x + L) / (2 * L) * static_cast<double>(nx - 1)));
    const double u = sol.at(last, x), mehler = reference::mehler_kernel(M, kappa, 1.0, x);
    const double rel = std::abs(u - fd[j]) / fd[j];
    worst_fd = std::max(worst_fd, rel);
    worst_mehler = std::max(worst_mehler, std::abs(u - mehler) / mehler);
    fd_rows.push_back({{"xi", x}, {"volterra", u}, {"finite_difference", fd[j]}, {"mehler", mehler}, {"rel_err", rel}});
  }
  CriterionResult r{7, "Feynman-Kac cross-validation", false, {}};
  r.passed = worst_free <= 1e-6 && mc_ok && worst_fd <= 1e-4;
  r.metrics = {{"free_volterra_max_rel_err", worst_free},
               {"free_tolerance", 1e-6},
               {"mc_eps", eps},
               {"mc", mc_rows},
               {"quadratic_kappa", kappa},
               {"quadratic_vs_fd", fd_rows},
               {"quadratic_fd_max_rel_err", worst_fd},
               {"quadratic_mehler_max_rel_err", worst_mehler},
               {"fd_tolerance", 1e-4}};
  return r;
}

/// Gaussian domination for V = x^4, the <q^2> bound and the Falk-Bruch identity.
inline CriterionResult criterion_equilibrium(const VerifyOptions& v) {
  const auto p = MeasureParams::make(1, 1, 1);
  const auto V = potentials::quartic(1.0);
  const std::size_t n = v.quick ? 100000 : 1000000;
  const auto dom = equilibrium::domination_check(p, V, {0.25, 0.5, 1.0}, detail::mc(v, 8, n, 64));
  const auto q2 = equilibrium::mean_square_q(p, V, detail::mc(v, 9, n, 64));
  const double bound = kernel::variance(p);
  const bool q_ok = q2.estimate <= bound + 4.0 * q2.std_error;
  auto rng = detail::rng_for(v, 8);
  double worst_fb = 0.0;
  for (int i = 0; i < 100; ++i)
    worst_fb = std::max(worst_fb, equilibrium::falk_bruch_bound(detail::random_params(rng, 0.5, 2.0)).identity_error);
  CriterionResult r{8, "equilibrium bounds", false, {}};
  r.passed = dom.all_ok() && q_ok && worst_fb <= 1e-12;
  r.metrics = {{"potential", "quartic"},
               {"g", 1.0},
               {"domination", dom},
               {"mean_square_q", q2},
               {"q2_bound", bound},
               {"q2_ok", q_ok},
               {"falk_bruch_unit", equilibrium::falk_bruch_bound(p)},
               {"falk_bruch_max_identity_err", worst_fb}};
  return r;
}

/// Same estimates at 1 and 4 threads must agree bit for bit.
inline CriterionResult criterion_determinism(const VerifyOptions& v) {
  const auto p = MeasureParams::make(1.1, 0.9, 1.3);
  bool same = true;
  json rows = json::array();
  for (auto method : {sampler::Method::finite_dim, sampler::Method::kl}) {
    auto o = detail::mc(v, 10, 5000, 32);
    o.method = method;
    o.modes = 32;
    o.chunk = 128;
    o.threads = 1;
    const auto a = sampler::estimate(p, functionals::monomial({0.2, 0.9}), o);
    o.threads = 4;
    const auto b = sampler::estimate(p, functionals::monomial({0.2, 0.9}), o);
    const bool eq = std::memcmp(&a.estimate, &b.estimate, sizeof(double)) == 0 &&
                    std::memcmp(&a.std_error, &b.std_error, sizeof(double)) == 0;
    same = same && eq;
    rows.push_back({{"method", sampler::to_string(method)}, {"threads_1", a}, {"threads_4", b}, {"identical", eq}});
  }
  CriterionResult r{9, "thread-count independence", false, {}};
  r.passed = same;
  r.metrics = {{"probes", rows}};
  return r;
}

inline const std::vector<std::function<CriterionResult(const VerifyOptions&)>>& criteria() {
  static const std::vector<std::function<CriterionResult(const VerifyOptions&)>> all{
      criterion_grid_closed_forms, criterion_exp_quadratic,          criterion_quadrature_exactness,
      criterion_rho_factorization, criterion_qvar,                   criterion_independent_increments,
      criterion_feynman_kac,       criterion_equilibrium,            criterion_determinism};
  return all;
}

/// Runs the selected criteria in id order; on_result sees each one as it finishes.
inline VerifyReport run(const VerifyOptions& v, const std::function<void(const CriterionResult&)>& on_result = {}) {
  VerifyReport rep;
  rep.quick = v.quick;
  rep.seed = v.seed;
  const auto& all = criteria();
  for (std::size_t i = 0; i < all.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!v.only.empty() && std::find(v.only.begin(), v.only.end(), id) == v.only.end()) continue;
    CriterionResult r;
    try {
      r = all[i](v);
    } catch (const std::exception& e) {
      r = {id, "criterion " + std::to_string(id), false, {{"error", e.what()}}};
    }
    if (on_result) on_result(r);
    rep.results.push_back(std::move(r));
  }
  return rep;
}

}  // namespace bogo::verify
