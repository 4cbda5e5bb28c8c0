#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "execution.hpp"
#include "kernel.hpp"
#include "numerics.hpp"
#include "potential.hpp"
#include "sampler.hpp"

/// Semigroups of the measure, the independent-increment transform and Feynman-Kac.
namespace bogo::dynamics {

using RealFn = std::function<double(double)>;

/// Variance coth(beta omega/2)/(2 m omega) of the one-time marginal.
inline double marginal_variance(const MeasureParams& p) { return kernel::variance(p); }

namespace detail {

/// Gauss-Hermite rules are cached; building one costs O(n^3).
inline const numerics::Rule& hermite(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, numerics::Rule> cache;
  std::lock_guard lk(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, numerics::gauss_hermite(n)).first;
  return it->second;
}

/// E g(Z), doubling the Gauss-Hermite order until two orders agree to 1e-12.
inline double gaussian_average(const std::function<double(double)>& g, std::size_t n, const char* who) {
  auto eval = [&](std::size_t k) {
    const auto& gh = hermite(k);
    std::vector<double> terms(gh.size());
    for (std::size_t i = 0; i < gh.size(); ++i) terms[i] = gh.weights[i] * g(gh.nodes[i]);
    return numerics::pairwise_sum(terms);
  };
  double prev = eval(n);
  for (std::size_t k = 2 * n; k <= 640; k *= 2) {
    const double cur = eval(k);
    if (!std::isfinite(cur)) break;
    if (std::abs(cur - prev) <= 1e-12 * std::max(1.0, std::abs(cur))) return cur;
    prev = cur;
  }
  throw NumericalError(std::string(who) + ": Gauss-Hermite quadrature did not converge (f too rough or too wide)");
}

}  // namespace detail

/// Ornstein-Uhlenbeck semigroup: E f(e^{-t} x + sqrt(1 - e^{-2t}) Y), Y ~ N(0, marginal variance).
inline double ou_apply(const MeasureParams& p, const RealFn& f, double t, double x, std::size_t n_quad = 20) {
  p.validate();
  if (!(t >= 0.0)) throw DomainError("ou_apply: t must be >= 0");
  if (t == 0.0) return f(x);
  const double mean = std::exp(-t) * x, sd = std::sqrt(-std::expm1(-2.0 * t) * marginal_variance(p));
  return detail::gaussian_average([&](double z) { return f(mean + sd * z); }, n_quad, "ou_apply");
}

/// (L f)(x) = -x f'(x) + (coth(beta omega/2)/(2 m omega)) f''(x), derivatives by central differences.
inline double ou_generator(const MeasureParams& p, const RealFn& f, double x) {
  const double h = 1e-4 * (1.0 + std::abs(x));
  const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
  const double d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
  return -x * d1 + marginal_variance(p) * d2;
}

struct GeneratorResidual {
  double t = 0.0;
  double residual = 0.0;
};

/// |(T(t) f - f)/t - L f| at t = 1e-2 and 1e-3.
inline std::vector<GeneratorResidual> ou_generator_check(const MeasureParams& p, const RealFn& f, double x) {
  const double Lf = ou_generator(p, f, x);
  std::vector<GeneratorResidual> out;
  for (double t : {1e-2, 1e-3}) out.push_back({t, std::abs((ou_apply(p, f, t, x) - f(x)) / t - Lf)});
  return out;
}

/// Free heat semigroup: E f(x + sqrt(beta_arg/(m omega^2)) Z).
inline double heat_apply(const MeasureParams& p, const RealFn& f, double beta_arg, double x, std::size_t n_quad = 20) {
  p.validate();
  if (!(beta_arg > 0.0)) throw DomainError("heat_apply: beta must be positive");
  const double sd = std::sqrt(beta_arg / p.stiffness());
  return detail::gaussian_average([&](double z) { return f(x + sd * z); }, n_quad, "heat_apply");
}

struct TransformedPath {
  double beta = 1.0;
  std::vector<double> times;
  std::vector<double> y_values;
};

/// y(t) = x(t)/omega + int_0^t x, running integral by the trapezoid rule.
inline TransformedPath transform_y(const PathSample& x, const MeasureParams& p) {
  TransformedPath y;
  y.beta = x.beta;
  const std::size_t n = x.intervals();
  y.times.resize(n + 1);
  y.y_values.resize(n + 1);
  double acc = 0.0;
  const double dt = x.dt();
  for (std::size_t j = 0; j <= n; ++j) {
    if (j > 0) acc += 0.5 * dt * (x.values[j - 1] + x.values[j]);
    y.times[j] = x.time(j);
    y.y_values[j] = x.values[j] / p.omega + acc;
  }
  return y;
}

/// M(y(t) y(s)) for y(t) = x(t)/omega + int_0^t x.
inline double y_covariance_exact(const MeasureParams& p, double t, double s) {
  kernel::detail::check_time(p, t, "t");
  kernel::detail::check_time(p, s, "s");
  const double w = p.omega, hb = p.half_bw();
  // e^{w t - hb} / sinh(hb), written to stay finite for large beta omega
  auto es = [&](double u) { return 2.0 * std::exp(w * u - 2.0 * hb) / -std::expm1(-2.0 * hb); };
  const double brace = 2.0 * (1.0 / w + std::min(s, t)) - numerics::coth(hb) / w + (es(s) + es(t)) / w;
  return brace / (2.0 * p.m * w * w);
}

/// Free kernel sqrt(M/(2 pi beta)) exp(-M xi^2/(2 beta)), M = m omega^2.
inline double fk_free(const MeasureParams& p, double beta_arg, double xi) {
  if (!(beta_arg > 0.0)) throw DomainError("fk_free: beta must be positive");
  const double M = p.stiffness();
  return std::sqrt(M / (2.0 * std::numbers::pi * beta_arg)) * std::exp(-M * xi * xi / (2.0 * beta_arg));
}

struct FKOptions {
  double beta_max = 1.0;
  std::size_t n_beta = 200;
  std::size_t n_xi = 401;
  double xi_max = 0.0;       ///< 0: six free-kernel standard deviations at beta_max
  std::size_t n_quad = 24;   ///< Gauss-Hermite nodes for the bridge average
  unsigned threads = 1;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FKSolution {
  std::vector<double> beta_grid;  ///< beta_max i / n_beta, i = 1..n_beta
  std::vector<double> xi_grid;
  RowMatrix u;                    ///< u(beta_i, xi_j)
  RowMatrix w;                    ///< u divided by the free kernel
  std::string potential;
  double coupling = 0.0;
  MeasureParams params;

  /// u at slice i, interpolated in xi.
  double at(std::size_t i, double xi) const;
};

namespace detail {

/// Four-point Lagrange interpolation on a uniform grid; constant beyond the ends.
inline double interp(const double* v, std::size_t n, double x0, double h, double x) {
  const double s = (x - x0) / h;
  if (s <= 0.0) return v[0];
  if (s >= static_cast<double>(n - 1)) return v[n - 1];
  std::size_t j = static_cast<std::size_t>(s);
  j = std::clamp<std::size_t>(j, 1, n - 3);
  const double f = s - static_cast<double>(j);
  const double a = v[j - 1], b = v[j], c = v[j + 1], d = v[j + 2];
  return b + 0.5 * f * (c - a + f * (2.0 * a - 5.0 * b + 4.0 * c - d + f * (3.0 * (b - c) + d - a)));
}

}  // namespace detail

inline double FKSolution::at(std::size_t i, double xi) const {
  const double h = xi_grid[1] - xi_grid[0];
  const double wv = detail::interp(w.row(static_cast<Eigen::Index>(i)).data(), xi_grid.size(), xi_grid.front(), h, xi);
  return wv * fk_free(params, beta_grid[i], xi);
}

/**
 * Solves u(beta, xi) = K(beta, xi) - int_0^beta int V(eta) u(tau, eta) K(beta - tau, xi - eta) deta dtau
 * for the free kernel K. With u = K w the inner integral becomes an average
 * over the Brownian bridge from (0, 0) to (beta, xi),
 * w(beta, xi) = 1 - int_0^beta E[V(eta) w(tau, eta)] dtau, eta ~ N(tau xi/beta, tau (beta - tau)/(M beta)),
 * which has no endpoint singularity. The tau integral uses the trapezoid rule
 * with the tau = beta term treated implicitly.
 */
inline FKSolution fk_solve_volterra(const MeasureParams& p, const Potential& V, FKOptions o = {}) {
  p.validate();
  if (!(o.beta_max > 0.0) || o.n_beta < 1 || o.n_xi < 5)
    throw ParameterError("fk_solve_volterra: need beta_max > 0, n_beta >= 1 and n_xi >= 5");
  if (!(V.lower_bound > -std::numeric_limits<double>::infinity()))
    throw ParameterError("fk_solve_volterra: potential must be bounded below");
  const double M = p.stiffness();
  if (o.xi_max <= 0.0) o.xi_max = 6.0 * std::sqrt(o.beta_max / M);
  const std::size_t nb = o.n_beta, nx = o.n_xi;
  const double db = o.beta_max / static_cast<double>(nb), hx = 2.0 * o.xi_max / static_cast<double>(nx - 1);

  FKSolution sol;
  sol.params = p;
  sol.potential = V.name;
  sol.coupling = V.coupling;
  for (std::size_t i = 1; i <= nb; ++i) sol.beta_grid.push_back(db * static_cast<double>(i));
  for (std::size_t j = 0; j < nx; ++j) sol.xi_grid.push_back(-o.xi_max + hx * static_cast<double>(j));
  sol.w.resize(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nx));
  sol.u.resize(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(nx));

  const auto& gh = detail::hermite(o.n_quad);
  std::vector<double> Vx(nx);
  for (std::size_t j = 0; j < nx; ++j) Vx[j] = V(sol.xi_grid[j]);
  // trapezoid stepping damps by (1 - dV/2)/(1 + dV/2) per step: positive only for dV < 2
  const double vmax = *std::max_element(Vx.begin(), Vx.end());
  if (db * vmax >= 2.0)
    throw NumericalError("fk_solve_volterra: grid too coarse, beta step times max V = " + std::to_string(db * vmax) +
                         " must stay below 2; use n_beta >= " +
                         std::to_string(static_cast<std::size_t>(std::ceil(o.beta_max * vmax)) + 1) +
                         " or a smaller xi_max");
  const double V0 = V(0.0);
  // row-major copy of w for cache-friendly interpolation
  std::vector<double> W(nb * nx);

  for (std::size_t i = 1; i <= nb; ++i) {
    const double beta = db * static_cast<double>(i);
    parallel_chunks(nx, 32, resolve_threads(o.threads), [&](std::size_t jb, std::size_t je) {
      for (std::size_t j = jb; j < je; ++j) {
        const double xi = sol.xi_grid[j];
        double acc = 0.5 * V0;
        for (std::size_t k = 1; k < i; ++k) {
          const double tau = db * static_cast<double>(k);
          const double mean = tau * xi / beta, sd = std::sqrt(tau * (beta - tau) / (M * beta));
          const double* wk = &W[(k - 1) * nx];
          double g = 0.0;
          for (std::size_t l = 0; l < gh.size(); ++l) {
            const double eta = mean + sd * gh.nodes[l];
            g += gh.weights[l] * V(eta) * detail::interp(wk, nx, -o.xi_max, hx, eta);
          }
          acc += g;
        }
        const double den = 1.0 + 0.5 * db * Vx[j];
        if (!(den > 0.0))
          throw NumericalError("fk_solve_volterra: beta step too coarse for the potential minimum; raise n_beta");
        const double wv = (1.0 - db * acc) / den;
        W[(i - 1) * nx + j] = wv;
      }
    });
    for (std::size_t j = 0; j < nx; ++j) {
      const double wv = W[(i - 1) * nx + j];
      if (!std::isfinite(wv) || wv < 0.0)
        throw NumericalError("fk_solve_volterra: solution lost positivity at beta = " + std::to_string(beta) +
                             ", xi = " + std::to_string(sol.xi_grid[j]) +
                             "; grid too coarse, try doubling n_beta (currently " + std::to_string(nb) + ")");
      sol.w(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) = wv;
      sol.u(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j)) = wv * fk_free(p, beta, sol.xi_grid[j]);
    }
  }
  return sol;
}

/**
 * Max-norm of du/dbeta - (1/(2M)) d2u/dxi2 + V u over slices with
 * beta >= beta_from and xi at least two points from the edges. Central
 * difference in beta, five-point stencil in xi.
 */
inline double fk_pde_residual(const FKSolution& s, const Potential& V, double beta_from) {
  const double M = s.params.stiffness();
  const std::size_t nb = s.beta_grid.size(), nx = s.xi_grid.size();
  if (nb < 3 || nx < 5) throw ParameterError("fk_pde_residual: grid too small");
  const double db = s.beta_grid[1] - s.beta_grid[0], hx = s.xi_grid[1] - s.xi_grid[0];
  double r = 0.0;
  for (std::size_t i = 1; i + 1 < nb; ++i) {
    if (s.beta_grid[i] < beta_from) continue;
    const auto I = static_cast<Eigen::Index>(i);
    for (std::size_t j = 2; j + 2 < nx; ++j) {
      const auto J = static_cast<Eigen::Index>(j);
      const double ub = (s.u(I + 1, J) - s.u(I - 1, J)) / (2.0 * db);
      const double uxx = (-s.u(I, J - 2) + 16.0 * s.u(I, J - 1) - 30.0 * s.u(I, J) + 16.0 * s.u(I, J + 1) -
                          s.u(I, J + 2)) / (12.0 * hx * hx);
      r = std::max(r, std::abs(ub - uxx / (2.0 * M) + V(s.xi_grid[j]) * s.u(I, J)));
    }
  }
  return r;
}

/**
 * Monte Carlo for u(beta, xi): Bogolyubov paths at inverse temperature
 * beta_arg, y from transform_y, a Gaussian mollifier of width eps for the
 * endpoint delta and the trapezoid rule for int V(y(s) - y(0)) ds. The
 * mollifier adds a bias of about eps^2/2 |d2u/dxi2|.
 */
inline std::vector<sampler::EstimateReport> fk_estimate_mc(const MeasureParams& p, const Potential& V, double beta_arg,
                                                           const std::vector<double>& xi, double eps,
                                                           sampler::SamplingOptions o) {
  if (!(eps > 0.0)) throw ParameterError("fk_estimate_mc: mollifier width must be positive");
  const auto q = p.with_beta(beta_arg);
  const double norm = 1.0 / (eps * std::sqrt(2.0 * std::numbers::pi));
  const auto s = sampler::simulate_paths(q, o, xi.size(), [&](std::size_t, const PathSample& x, std::span<double> row) {
    const auto y = transform_y(x, q);
    const std::size_t n = x.intervals();
    double a = 0.5 * (V(0.0) + V(y.y_values[n] - y.y_values[0]));
    for (std::size_t j = 1; j < n; ++j) a += V(y.y_values[j] - y.y_values[0]);
    const double weight = std::exp(-a * x.dt());
    const double end = y.y_values[n] - y.y_values[0];
    for (std::size_t k = 0; k < xi.size(); ++k) {
      const double z = (end - xi[k]) / eps;
      row[k] = norm * std::exp(-0.5 * z * z) * weight;
    }
  });
  std::vector<sampler::EstimateReport> out;
  for (std::size_t k = 0; k < xi.size(); ++k) out.push_back(sampler::column_report(s, k, o));
  return out;
}

}  // namespace bogo::dynamics
