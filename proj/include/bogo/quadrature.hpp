#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "functional.hpp"
#include "kernel.hpp"
#include "numerics.hpp"
#include "params.hpp"

/// Functional-integration rules exact for functional polynomials.
namespace bogo::quadrature {

using cplx = std::complex<double>;

/// Nodes u_i and weights of the measure nu (weights sum to one).
struct UNodes {
  std::vector<double> u;
  std::vector<double> w;
  std::size_t size() const { return u.size(); }
};

struct QuadOptions {
  std::size_t order = 24;                     ///< Gauss-Legendre points per panel
  std::size_t panels = 1;                     ///< panels between consecutive kinks
  std::size_t max_tensor_points = 50'000'000; ///< guard for the tensor-product fallback
};

/**
 * Continuous factorization of B: nu = du / (2 beta) on [-beta, beta] and
 * rho(u, t) = sgn(u) sqrt(beta/m) e^{omega(t-|u|)} [theta(t-|u|) + e^{beta omega} theta(|u|-t)] / (e^{beta omega} - 1).
 * sgn(0) = 0; at t = |u| the first branch is used.
 */
class ContinuousRho {
 public:
  explicit ContinuousRho(const MeasureParams& p, QuadOptions o = {}) : p_(p), o_(o) {
    p.validate();
    pref_ = std::sqrt(p.beta / p.m) / -std::expm1(-p.beta * p.omega);
  }

  const MeasureParams& params() const { return p_; }
  std::string kind() const { return "continuous"; }

  double operator()(double u, double t) const {
    if (!(std::abs(u) <= p_.beta * (1 + 1e-12))) throw DomainError("rho: u outside [-beta, beta]");
    kernel::detail::check_time(p_, t, "t");
    return value(u, t);
  }

  double value(double u, double t) const {
    if (u == 0.0) return 0.0;
    const double a = std::abs(u);
    const double e = t >= a ? std::exp(p_.omega * (t - a - p_.beta)) : std::exp(p_.omega * (t - a));
    return u > 0 ? pref_ * e : -pref_ * e;
  }

  /// int_0^beta rho(u, t) dt.
  double integral(double u) const {
    if (u == 0.0) return 0.0;
    const double v = std::sqrt(p_.beta / p_.m) / p_.omega;
    return u > 0 ? v : -v;
  }

  /// int_0^beta rho(u, t) rho(v, t) dt.
  double gram(double u, double v) const {
    if (u == 0.0 || v == 0.0) return 0.0;
    const double a = std::abs(u), b = std::abs(v), w = p_.omega, bw = p_.beta * p_.omega;
    const double lo = std::min(a, b), hi = std::max(a, b), ab = w * (a + b);
    auto seg = [&](double x, double y, double shift) {
      return (std::exp(2 * w * y - ab - shift) - std::exp(2 * w * x - ab - shift)) / (2 * w);
    };
    const double s = seg(0.0, lo, 0.0) + seg(lo, hi, bw) + seg(hi, p_.beta, 2 * bw);
    const double sign = (u > 0) == (v > 0) ? 1.0 : -1.0;
    return sign * pref_ * pref_ * s;
  }

  /// Panels split at u = 0 and u = +-t for every point probe time.
  UNodes nodes(std::span<const Probe> probes) const {
    std::vector<double> br{0.0};
    for (const auto& pr : probes)
      if (pr.kind == ProbeKind::point) {
        br.push_back(pr.t);
        br.push_back(-pr.t);
      }
    const auto r = numerics::composite_gauss_legendre(-p_.beta, p_.beta, br, o_.order, o_.panels);
    UNodes n{r.nodes, r.weights};
    for (double& w : n.w) w /= 2.0 * p_.beta;
    return n;
  }

  /// int rho(u, t) rho(u, s) dnu(u) by the node rule.
  double reproduce(double t, double s) const {
    const Probe pr[2] = {{ProbeKind::point, t}, {ProbeKind::point, s}};
    const auto n = nodes(pr);
    std::vector<double> terms(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) terms[i] = n.w[i] * value(n.u[i], t) * value(n.u[i], s);
    return numerics::pairwise_sum(terms);
  }

 private:
  MeasureParams p_;
  QuadOptions o_;
  double pref_;
};

enum class BandWeights { geometric, spectral };

/**
 * Discrete factorization on atoms u = 0, +-1, ..., +-K with weights h_k.
 * Band k >= 1 carries eigen-index n(k) = 0, 1, -1, 2, -2, ... so every
 * eigenfunction (cosine and sine) is used once:
 * rho(u, t) = sgn(u) sqrt(lambda_{n(k)} / (2 h_k)) phi_{n(k)}(t) for floor(|u|) = k,
 * and rho = 0 for |u| < 1 or |u| >= K + 1.
 */
class DiscreteRho {
 public:
  DiscreteRho(const MeasureParams& p, std::size_t bands, BandWeights kind = BandWeights::geometric) : p_(p) {
    p.validate();
    if (bands == 0) throw ParameterError("discrete rho needs at least one band");
    std::vector<double> h(bands + 1);
    for (std::size_t k = 0; k <= bands; ++k)
      h[k] = kind == BandWeights::geometric ? std::ldexp(1.0, -static_cast<int>(std::min<std::size_t>(k, 1000)))
                                            : kernel::eigenvalue(p, eigen_index(std::max<std::size_t>(k, 1)));
    double z = h[0];
    for (std::size_t k = 1; k <= bands; ++k) z += 2.0 * h[k];
    for (double& v : h) v /= z;
    set_weights(std::move(h));
  }

  /// h[0] is the weight of u = 0, h[k] that of each of u = +-k.
  DiscreteRho(const MeasureParams& p, std::vector<double> h) : p_(p) {
    p.validate();
    set_weights(std::move(h));
  }

  static long eigen_index(std::size_t k) {
    if (k == 0) throw ParameterError("band 0 carries no eigenfunction");
    const long j = static_cast<long>(k / 2);
    return k % 2 == 0 ? j : -j;  // 1 -> 0, 2 -> 1, 3 -> -1, ...
  }

  const MeasureParams& params() const { return p_; }
  std::string kind() const { return "discrete"; }
  std::size_t bands() const { return h_.size() - 1; }
  const std::vector<double>& weights() const { return h_; }

  double operator()(double u, double t) const {
    kernel::detail::check_time(p_, t, "t");
    return value(u, t);
  }

  double value(double u, double t) const {
    const std::size_t k = band(u);
    if (k == 0) return 0.0;
    const double v = amp_[k] * kernel::eigenfunction(p_, eigen_index(k), t);
    return u > 0 ? v : -v;
  }

  double integral(double u) const {
    const std::size_t k = band(u);
    if (k != 1) return 0.0;  // only the constant mode integrates to nonzero
    const double v = amp_[1] * std::sqrt(p_.beta);
    return u > 0 ? v : -v;
  }

  double gram(double u, double v) const {
    const std::size_t a = band(u), b = band(v);
    if (a == 0 || a != b) return 0.0;
    return ((u > 0) == (v > 0) ? 1.0 : -1.0) * amp_[a] * amp_[a];
  }

  UNodes nodes(std::span<const Probe> = {}) const {
    UNodes n;
    n.u.push_back(0.0);
    n.w.push_back(h_[0]);
    for (std::size_t k = 1; k < h_.size(); ++k) {
      n.u.push_back(static_cast<double>(k));
      n.w.push_back(h_[k]);
      n.u.push_back(-static_cast<double>(k));
      n.w.push_back(h_[k]);
    }
    return n;
  }

  double reproduce(double t, double s) const {
    std::vector<double> terms;
    terms.reserve(h_.size());
    for (std::size_t k = h_.size() - 1; k >= 1; --k)
      terms.push_back(2.0 * h_[k] * value(static_cast<double>(k), t) * value(static_cast<double>(k), s));
    return numerics::pairwise_sum(terms);
  }

  /// sum over the eigen-indices carried by the bands of lambda_n phi_n(t) phi_n(s).
  double truncated_kernel(double t, double s) const {
    std::vector<double> terms;
    for (std::size_t k = h_.size() - 1; k >= 1; --k) {
      const long n = eigen_index(k);
      terms.push_back(kernel::eigenvalue(p_, n) * kernel::eigenfunction(p_, n, t) * kernel::eigenfunction(p_, n, s));
    }
    return numerics::pairwise_sum(terms);
  }

 private:
  std::size_t band(double u) const {
    const double a = std::floor(std::abs(u));
    if (a < 1.0 || a >= static_cast<double>(h_.size())) return 0;
    return static_cast<std::size_t>(a);
  }

  void set_weights(std::vector<double> h) {
    if (h.size() < 2) throw ParameterError("discrete rho needs at least one band");
    double z = h[0];
    for (std::size_t k = 0; k < h.size(); ++k) {
      if (!(h[k] > 0.0) || !std::isfinite(h[k])) throw ParameterError("band weights must be positive and finite");
      if (k > 0) z += 2.0 * h[k];
    }
    if (std::abs(z - 1.0) > 1e-12) throw ParameterError("band weights must satisfy h_0 + 2 sum h_k = 1");
    h_ = std::move(h);
    amp_.assign(h_.size(), 0.0);
    for (std::size_t k = 1; k < h_.size(); ++k) amp_[k] = std::sqrt(kernel::eigenvalue(p_, eigen_index(k)) / (2.0 * h_[k]));
  }

  MeasureParams p_;
  std::vector<double> h_;
  std::vector<double> amp_;
};

// ---------------------------------------------------------------------------
// Product-measure integration of F(sum_j c_j rho(u_j, .))

namespace detail {

template <class Rho>
double linear_probe(const Rho& rho, double u, const Probe& p) {
  return p.kind == ProbeKind::point ? rho.value(u, p.t) : rho.integral(u);
}

/// E over nu^n of a polynomial in linear probes, via subset moments.
template <class Rho>
cplx factorized(const Rho& rho, const Functional& F, std::span<const cplx> c) {
  const UNodes nd = rho.nodes(F.probes);
  const std::size_t n = c.size();
  cplx total(0.0, 0.0);
  for (const auto& term : F.terms) {
    const std::size_t d = term.factors.size();
    if (d > 20) throw UnsupportedFunctional("monomial degree above 20");
    const std::size_t full = std::size_t{1} << d;
    std::vector<double> vals(nd.size() * d);
    for (std::size_t i = 0; i < nd.size(); ++i)
      for (std::size_t a = 0; a < d; ++a) vals[i * d + a] = linear_probe(rho, nd.u[i], F.probes[term.factors[a]]);
    // M[S] = int prod_{a in S} r_a(u) dnu(u)
    std::vector<double> M(full, 0.0);
    std::vector<double> prod(full);
    std::vector<std::vector<double>> contrib(full, std::vector<double>());
    for (std::size_t S = 0; S < full; ++S) contrib[S].reserve(nd.size());
    for (std::size_t i = 0; i < nd.size(); ++i) {
      prod[0] = 1.0;
      for (std::size_t S = 1; S < full; ++S) {
        const std::size_t a = static_cast<std::size_t>(std::countr_zero(S));
        prod[S] = prod[S & (S - 1)] * vals[i * d + a];
      }
      for (std::size_t S = 0; S < full; ++S) contrib[S].push_back(nd.w[i] * prod[S]);
    }
    for (std::size_t S = 0; S < full; ++S) M[S] = numerics::pairwise_sum(contrib[S]);
    // G[T] = sum over ways to split T across the first j components
    std::vector<cplx> G(full, cplx(0.0)), H(full);
    G[0] = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<cplx> cpow(d + 1, cplx(1.0));
      for (std::size_t k = 1; k <= d; ++k) cpow[k] = cpow[k - 1] * c[j];
      for (std::size_t T = 0; T < full; ++T) {
        cplx acc(0.0);
        // S ranges over subsets of T, including T and the empty set
        for (std::size_t S = T;; S = (S - 1) & T) {
          if (G[T & ~S] != cplx(0.0)) acc += G[T & ~S] * cpow[static_cast<std::size_t>(std::popcount(S))] * M[S];
          if (S == 0) break;
        }
        H[T] = acc;
      }
      G.swap(H);
    }
    total += term.coef * G[full - 1];
  }
  return total;
}

/// Tensor-product rule; any functional, complex c only for polynomial F.
template <class Rho>
cplx tensor(const Rho& rho, const Functional& F, std::span<const cplx> c, const QuadOptions& o) {
  const bool complex_c = std::any_of(c.begin(), c.end(), [](cplx z) { return z.imag() != 0.0; });
  if (complex_c && !F.is_polynomial())
    throw UnsupportedFunctional(F.name + ": complex nodes need a polynomial functional");
  if (F.needs_grid()) throw UnsupportedFunctional(F.name + " needs a grid path and cannot be used in a rule");
  const UNodes nd = rho.nodes(F.probes);
  const std::size_t m = nd.size(), n = c.size(), np = F.probes.size();
  double total_pts = 1.0;
  for (std::size_t j = 0; j < n; ++j) total_pts *= static_cast<double>(m);
  if (total_pts > static_cast<double>(o.max_tensor_points))
    throw ParameterError("tensor-product rule needs " + std::to_string(total_pts) +
                         " points; lower the order/panels or raise max_tensor_points");
  std::vector<double> lin(m * np, 0.0);
  bool need_gram = false;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t q = 0; q < np; ++q) {
      if (F.probes[q].kind == ProbeKind::square_integral)
        need_gram = true;
      else
        lin[i * np + q] = linear_probe(rho, nd.u[i], F.probes[q]);
    }
  std::vector<double> gram;
  if (need_gram) {
    gram.resize(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k) gram[i * m + k] = rho.gram(nd.u[i], nd.u[k]);
  }
  std::vector<std::size_t> idx(n, 0);
  std::vector<cplx> pv(np);
  std::vector<double> pr(np);
  std::vector<cplx> acc;
  acc.reserve(static_cast<std::size_t>(total_pts));
  for (;;) {
    double w = 1.0;
    for (std::size_t j = 0; j < n; ++j) w *= nd.w[idx[j]];
    for (std::size_t q = 0; q < np; ++q) {
      cplx v(0.0);
      if (F.probes[q].kind == ProbeKind::square_integral) {
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t l = 0; l < n; ++l) v += c[j] * c[l] * gram[idx[j] * m + idx[l]];
      } else {
        for (std::size_t j = 0; j < n; ++j) v += c[j] * lin[idx[j] * np + q];
      }
      pv[q] = v;
    }
    cplx f;
    if (complex_c) {
      f = F.combine(std::span<const cplx>(pv));
    } else {
      for (std::size_t q = 0; q < np; ++q) pr[q] = pv[q].real();
      f = F.combine(std::span<const double>(pr));
    }
    acc.push_back(w * f);
    std::size_t j = 0;
    while (j < n && ++idx[j] == m) idx[j++] = 0;
    if (j == n) break;
  }
  return numerics::pairwise_sum(acc);
}

/**
 * Polynomial with square-integral probes: each int x^2 factor becomes an outer
 * tau integral of x(tau)^2, taken by Gauss-Legendre split at the point-probe
 * times. The inner integrals use the factorized path.
 */
template <class Rho>
cplx expand_squares(const Rho& rho, const Functional& F, std::span<const cplx> c, const QuadOptions& o) {
  const double beta = rho.params().beta;
  std::vector<double> br;
  for (const auto& pr : F.probes)
    if (pr.kind == ProbeKind::point) br.push_back(pr.t);
  const auto tau = numerics::composite_gauss_legendre(0.0, beta, br, o.order, 2);
  cplx total(0.0);
  for (const auto& term : F.terms) {
    std::vector<std::size_t> sq;
    Functional base;
    base.name = F.name;
    Functional::Term bt{term.coef, {}};
    for (std::size_t f : term.factors) {
      if (F.probes[f].kind == ProbeKind::square_integral) {
        sq.push_back(f);
      } else {
        bt.factors.push_back(base.probes.size());
        base.probes.push_back(F.probes[f]);
      }
    }
    const std::size_t s = sq.size();
    for (std::size_t j = 0; j < s; ++j) {
      bt.factors.push_back(base.probes.size());
      bt.factors.push_back(base.probes.size());
      base.probes.push_back({ProbeKind::point, 0.0});
    }
    base.terms.push_back(bt);
    const std::size_t first = base.probes.size() - s;
    std::vector<std::size_t> idx(s, 0);
    std::vector<cplx> acc;
    for (;;) {
      double w = 1.0;
      for (std::size_t j = 0; j < s; ++j) {
        base.probes[first + j].t = tau.nodes[idx[j]];
        w *= tau.weights[idx[j]];
      }
      acc.push_back(w * factorized(rho, base, c));
      std::size_t j = 0;
      while (j < s && ++idx[j] == tau.size()) idx[j++] = 0;
      if (j == s) break;
    }
    total += numerics::pairwise_sum(acc);
  }
  return total;
}

inline double at_zero(const Functional& F) {
  if (F.needs_grid()) throw UnsupportedFunctional(F.name + " needs a grid path");
  std::vector<double> z(F.probes.size(), 0.0);
  return F.combine(std::span<const double>(z));
}

}  // namespace detail

/// int F(sum_j c_j rho(u_j, .)) dnu(u_1)...dnu(u_n).
template <class Rho>
cplx integrate_nodes(const Rho& rho, const Functional& F, std::span<const cplx> c, const QuadOptions& o = {},
                     std::string* method = nullptr) {
  if (c.empty()) return detail::at_zero(F);
  if (F.is_polynomial() && F.linear_probes_only()) {
    if (method) *method = "factorized";
    return detail::factorized(rho, F, c);
  }
  if (F.is_polynomial()) {
    if (method) *method = "square_expansion";
    return detail::expand_squares(rho, F, c, o);
  }
  if (method) *method = "tensor";
  return detail::tensor(rho, F, c, o);
}

// ---------------------------------------------------------------------------
// Theorem 1

inline constexpr int qn_degree_cap = 12;

/// Roots of Q_n(z) = sum_{k=0}^n z^{n-k} / k!, Newton-polished.
inline std::vector<cplx> qn_roots(int n) {
  if (n < 1 || n > qn_degree_cap) throw ParameterError("qn_roots: n must be in [1, " + std::to_string(qn_degree_cap) + "]");
  std::vector<double> a(static_cast<std::size_t>(n) + 1);  // a[k] multiplies z^{n-k}
  a[0] = 1.0;
  for (int k = 1; k <= n; ++k) a[static_cast<std::size_t>(k)] = a[static_cast<std::size_t>(k - 1)] / k;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) comp(0, k) = -a[static_cast<std::size_t>(k + 1)];
  for (int k = 1; k < n; ++k) comp(k, k - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  std::vector<cplx> roots;
  for (int k = 0; k < n; ++k) {
    cplx z = es.eigenvalues()(k);
    for (int it = 0; it < 3; ++it) {
      cplx p = a[0], dp = 0.0;
      for (int j = 1; j <= n; ++j) {
        dp = dp * z + p;
        p = p * z + a[static_cast<std::size_t>(j)];
      }
      if (dp != cplx(0.0)) z -= p / dp;
    }
    roots.push_back(z);
  }
  std::sort(roots.begin(), roots.end(),
            [](cplx x, cplx y) { return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag(); });
  return roots;
}

inline cplx qn_eval(int n, cplx z) {
  cplx p = 1.0;
  double a = 1.0;
  for (int k = 1; k <= n; ++k) {
    a /= k;
    p = p * z + a;
  }
  return p;
}

/**
 * Node coefficients for the degree-(2n+1) rule. c_j^2 = -z_j with z_j the
 * roots of Q_n: these are the roots of sum_k (-1)^k z^{n-k}/k!, the choice
 * under which the rule reproduces B (n = 1 gives c = 1).
 */
struct Thm1Rule {
  int n = 0;
  std::vector<cplx> qn_roots;
  std::vector<cplx> c2;
  std::vector<cplx> c;
};

inline Thm1Rule thm1_rule(int n) {
  Thm1Rule r;
  r.n = n;
  r.qn_roots = qn_roots(n);
  for (cplx z : r.qn_roots) {
    cplx s = -z;
    if (std::abs(s.imag()) < 1e-15 * std::abs(s)) s = s.real();
    r.c2.push_back(s);
    r.c.push_back(std::sqrt(s));
  }
  return r;
}

struct QuadResult {
  cplx value;
  std::string rule;
  std::string method;  ///< factorized, square_expansion or tensor
  std::string rho;
  std::string scaling; ///< thm2 only
};

template <class Rho>
QuadResult thm1_integrate(const Rho& rho, const Functional& F, int n, const QuadOptions& o = {}) {
  const Thm1Rule r = thm1_rule(n);
  QuadResult q;
  q.rule = "thm1";
  q.rho = rho.kind();
  q.value = integrate_nodes(rho, F, r.c, o, &q.method);
  return q;
}

// ---------------------------------------------------------------------------
// Theorem 2 and the I_n family

enum class Scaling {
  eq31,             ///< theta_k scaled by 1/sqrt(A - n + k)
  inv_sqrt_factorial ///< 1/sqrt(k!) as printed for the I_n special case
};

inline std::string to_string(Scaling s) { return s == Scaling::eq31 ? "inv_sqrt(A-n+k)" : "inv_sqrt(k!)"; }

namespace detail {
template <class Rho>
double scaled_term(const Rho& rho, const Functional& F, std::size_t k, double scale, const QuadOptions& o,
                   std::string* method) {
  std::vector<cplx> c(k, cplx(scale));
  return integrate_nodes(rho, F, c, o, method).real();
}

inline double binom_weight(int n, int k) { return std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0); }
}  // namespace detail

template <class Rho>
QuadResult thm2_integrate(const Rho& rho, const Functional& F, int n, double A, const QuadOptions& o = {},
                          Scaling scaling = Scaling::eq31) {
  if (n < 1) throw ParameterError("thm2: n must be >= 1");
  if (!(A > n - 1)) throw DomainError("thm2: A must exceed n - 1 so that every A - n + k is positive");
  QuadResult q;
  q.rule = "thm2";
  q.rho = rho.kind();
  q.scaling = to_string(scaling);
  std::vector<double> terms;
  terms.push_back((n % 2 == 0 ? 1.0 : -1.0) * std::pow(A - n, n) / std::tgamma(n + 1.0) * detail::at_zero(F));
  for (int k = 1; k <= n; ++k) {
    const double s = scaling == Scaling::eq31 ? 1.0 / std::sqrt(A - n + k) : 1.0 / std::sqrt(std::tgamma(k + 1.0));
    const double J = detail::scaled_term(rho, F, static_cast<std::size_t>(k), s, o, &q.method);
    terms.push_back(((n - k) % 2 == 0 ? 1.0 : -1.0) * std::pow(A - n + k, n) / detail::binom_weight(n, k) * J);
  }
  q.value = numerics::pairwise_sum(terms);
  return q;
}

/// I_n(F), the A = n case of thm2.
template <class Rho>
double in_direct(const Rho& rho, const Functional& F, int n, Scaling s = Scaling::eq31, const QuadOptions& o = {}) {
  return thm2_integrate(rho, F, n, static_cast<double>(n), o, s).value.real();
}

/// I_n(F) = n^n/n! J_n - sum_{k<n} k n^{n-1-k}/(n-k)! I_k(F).
template <class Rho>
double in_recursive(const Rho& rho, const Functional& F, int n, Scaling s = Scaling::eq31, const QuadOptions& o = {}) {
  if (n < 1) throw ParameterError("I_n needs n >= 1");
  std::vector<double> I(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j) {
    const double scale = s == Scaling::eq31 ? 1.0 / std::sqrt(static_cast<double>(j)) : 1.0 / std::sqrt(std::tgamma(j + 1.0));
    const double J = detail::scaled_term(rho, F, static_cast<std::size_t>(j), scale, o, nullptr);
    double v = std::pow(j, j) / std::tgamma(j + 1.0) * J;
    for (int k = 1; k < j; ++k) v -= k * std::pow(j, j - 1 - k) / std::tgamma(j - k + 1.0) * I[static_cast<std::size_t>(k)];
    I[static_cast<std::size_t>(j)] = v;
  }
  return I[static_cast<std::size_t>(n)];
}

// ---------------------------------------------------------------------------
// Theorems 3 and 4: symmetric two-point rules on eigen-directions

/// Path b * phi_n(t).
struct EigenPath {
  double beta = 1.0;
  long n = 0;
  double b = 0.0;
  double probe(const Probe& p) const {
    switch (p.kind) {
      case ProbeKind::point:
        return b * kernel::EigenPair{n, 0.0, beta}.phi(p.t);
      case ProbeKind::integral:
        return n == 0 ? b * std::sqrt(beta) : 0.0;
      case ProbeKind::square_integral:
        return b * b;
    }
    return 0.0;
  }
};

struct EigenRule {
  struct Node {
    long n = 0;
    double A = 0.0;  ///< A_k
    double b = 0.0;  ///< node path is +- b phi_n
  };
  MeasureParams params;
  double p0 = 1.0;
  double A = 0.0;  ///< sum of A_k over the nodes
  std::vector<Node> nodes;
};

/**
 * Rule for int p(x) F(x) dmu given r(t, s) = sum_k r_k phi_k(t) phi_k(s) and
 * positive weights A_k: nodes +- sqrt(r_k / A_k) phi_k.
 */
inline EigenRule thm3_rule(const MeasureParams& p, double p0, const std::vector<long>& index,
                           const std::vector<double>& r, const std::vector<double>& A) {
  if (index.size() != r.size() || r.size() != A.size()) throw ParameterError("thm3: rule data sizes differ");
  EigenRule rule;
  rule.params = p;
  rule.p0 = p0;
  std::vector<double> as;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(A[i] > 0.0) || !std::isfinite(A[i])) throw ParameterError("thm3: every A_k must be positive and finite");
    if (!(r[i] >= 0.0)) throw ParameterError("thm3: r must be positive semidefinite");
    rule.nodes.push_back({index[i], A[i], std::sqrt(r[i] / A[i])});
    as.push_back(A[i]);
  }
  rule.A = numerics::pairwise_sum(as);
  if (!std::isfinite(rule.A)) throw ParameterError("thm3: sum of A_k diverges");
  return rule;
}

/// Weight p(x) = int x^2: p0 = Tr B, r_k = lambda_k + 2 lambda_k^2 / Tr B, default A_k = lambda_k/(Tr B + 2 lambda_k).
inline EigenRule thm3_square_weight_rule(const MeasureParams& p, long k_max) {
  const double tr = kernel::trace(p);
  std::vector<long> idx;
  std::vector<double> r, A;
  for (long k = -k_max; k <= k_max; ++k) {
    const double l = kernel::eigenvalue(p, k);
    idx.push_back(k);
    r.push_back(l + 2.0 * l * l / tr);
    A.push_back(l / (tr + 2.0 * l));
  }
  return thm3_rule(p, tr, idx, r, A);
}

struct Thm4Constants {
  std::vector<long> k;
  std::vector<double> Bk, Ak;
  double A = 0.0;    ///< closed form over all k
  double TrB = 0.0;
};

inline double thm4_A_closed(const MeasureParams& p) {
  const double bw = p.beta * p.omega;
  const double r = std::sqrt(1.0 + 4.0 * std::tanh(0.5 * bw) / bw);
  return numerics::coth(0.5 * bw * r) / (r * numerics::coth(0.5 * bw));
}

inline Thm4Constants thm4_constants(const MeasureParams& p, long k_max) {
  Thm4Constants c;
  c.TrB = kernel::trace(p);
  const double ct = numerics::coth(p.half_bw());
  for (long k = -k_max; k <= k_max; ++k) {
    const double q = 2.0 * std::numbers::pi * static_cast<double>(k) / p.beta;
    c.k.push_back(k);
    c.Bk.push_back(c.TrB + 2.0 * kernel::eigenvalue(p, k));
    c.Ak.push_back(1.0 / (2.0 + p.beta / (2.0 * p.omega) * ct * (p.omega * p.omega + q * q)));
  }
  c.A = thm4_A_closed(p);
  return c;
}

/// p = 1, V = int x^2: nodes +- sqrt(lambda_k / A_k) phi_k = +- sqrt(B_k) phi_k.
inline EigenRule thm4_rule(const MeasureParams& p, long k_max) {
  const auto c = thm4_constants(p, k_max);
  std::vector<double> r;
  for (long k : c.k) r.push_back(kernel::eigenvalue(p, k));
  return thm3_rule(p, 1.0, c.k, r, c.Ak);
}

/// p0 [(1 - A) F(0) + 1/2 sum A_k (F(b_k phi_k) + F(-b_k phi_k))].
inline double eigen_rule_integrate(const EigenRule& rule, const Functional& F) {
  if (F.needs_grid()) throw UnsupportedFunctional(F.name + " needs a grid path");
  std::vector<double> terms;
  terms.reserve(rule.nodes.size() + 1);
  terms.push_back((1.0 - rule.A) * detail::at_zero(F));
  for (const auto& nd : rule.nodes) {
    const EigenPath plus{rule.params.beta, nd.n, nd.b}, minus{rule.params.beta, nd.n, -nd.b};
    terms.push_back(0.5 * nd.A * (evaluate(F, plus) + evaluate(F, minus)));
  }
  return rule.p0 * numerics::pairwise_sum(terms);
}

}  // namespace bogo::quadrature
