#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "params.hpp"

namespace bogo {

/// A linear or quadratic observable of a path that functionals are built from.
enum class ProbeKind { point, integral, square_integral };

struct Probe {
  ProbeKind kind = ProbeKind::point;
  double t = 0.0;  ///< only for point probes
};

/// Path on the uniform grid t_j = beta j / N, j = 0..N, with values[N] == values[0].
struct PathSample {
  double beta = 1.0;
  std::vector<double> values;

  std::size_t intervals() const { return values.size() - 1; }
  double dt() const { return beta / static_cast<double>(intervals()); }
  double time(std::size_t j) const { return beta * static_cast<double>(j) / static_cast<double>(intervals()); }

  /// Linear interpolation between grid values.
  double at(double t) const {
    const std::size_t n = intervals();
    const double u = std::clamp(t / beta, 0.0, 1.0) * static_cast<double>(n);
    const std::size_t j = std::min(static_cast<std::size_t>(u), n - 1);
    const double f = u - static_cast<double>(j);
    return (1.0 - f) * values[j] + f * values[j + 1];
  }

  double probe(const Probe& p) const {
    const std::size_t n = intervals();
    switch (p.kind) {
      case ProbeKind::point:
        return at(p.t);
      case ProbeKind::integral: {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += values[j];
        return s * dt();
      }
      case ProbeKind::square_integral: {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += values[j] * values[j];
        return s * dt();
      }
    }
    return 0.0;
  }
};

/// Trapezoid rule for int_0^beta f(x(t)) dt on a periodic grid path.
template <class F>
double path_integral(const PathSample& x, F&& f) {
  const std::size_t n = x.intervals();
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += f(x.values[j]);
  return s * x.dt();
}

/**
 * Functional of a path. Polynomial functionals are sums of products of probe
 * values and can be evaluated on complex-valued paths; the others carry a real
 * map of the probe values, or of a whole grid path.
 */
class Functional {
 public:
  struct Term {
    double coef = 1.0;
    std::vector<std::size_t> factors;  ///< indices into probes
  };

  std::string name;
  std::vector<Probe> probes;
  std::vector<Term> terms;
  std::function<double(std::span<const double>)> map;
  std::function<double(const PathSample&)> path_map;

  bool is_polynomial() const { return !map && !path_map; }
  bool needs_grid() const { return static_cast<bool>(path_map); }

  bool linear_probes_only() const {
    return std::none_of(probes.begin(), probes.end(),
                        [](const Probe& p) { return p.kind == ProbeKind::square_integral; });
  }

  /// Polynomial degree in the path; square_integral counts twice.
  int degree() const {
    if (!is_polynomial()) return -1;
    int d = 0;
    for (const auto& t : terms) {
      int s = 0;
      for (std::size_t f : t.factors) s += probes[f].kind == ProbeKind::square_integral ? 2 : 1;
      d = std::max(d, s);
    }
    return d;
  }

  template <class S>
  S combine(std::span<const S> v) const {
    if (is_polynomial()) {
      S acc{};
      for (const auto& t : terms) {
        S prod(t.coef);
        for (std::size_t f : t.factors) prod *= v[f];
        acc += prod;
      }
      return acc;
    }
    if (path_map) throw UnsupportedFunctional(name + " needs a grid path");
    if constexpr (std::is_same_v<S, double>) {
      return map(v);
    } else {
      throw UnsupportedFunctional(name + " is not polynomial and cannot take complex paths");
    }
  }
};

/// Evaluate on any path view exposing probe(const Probe&).
template <class View>
auto evaluate(const Functional& F, const View& view) {
  using S = std::decay_t<decltype(view.probe(Probe{}))>;
  std::vector<S> v;
  v.reserve(F.probes.size());
  for (const auto& p : F.probes) v.push_back(view.probe(p));
  return F.combine(std::span<const S>(v));
}

inline double evaluate(const Functional& F, const PathSample& x) {
  if (F.path_map) return F.path_map(x);
  std::vector<double> v;
  v.reserve(F.probes.size());
  for (const auto& p : F.probes) v.push_back(x.probe(p));
  return F.combine(std::span<const double>(v));
}

namespace functionals {

inline Functional constant(double c) {
  Functional f;
  f.name = "const";
  f.terms.push_back({c, {}});
  return f;
}

/// x(t_1) x(t_2) ... x(t_k).
inline Functional monomial(std::vector<double> times) {
  Functional f;
  f.name = "monomial";
  Functional::Term t;
  for (std::size_t i = 0; i < times.size(); ++i) {
    f.probes.push_back({ProbeKind::point, times[i]});
    t.factors.push_back(i);
  }
  f.terms.push_back(std::move(t));
  return f;
}

/// int x(t)^2 dt.
inline Functional time_square_integral() {
  Functional f;
  f.name = "time_square_integral";
  f.probes.push_back({ProbeKind::square_integral, 0.0});
  f.terms.push_back({1.0, {0}});
  return f;
}

/// (int x(t) dt)^k.
inline Functional integral_power(int k) {
  Functional f;
  f.name = k == 2 ? "mean_square" : "integral_power";
  f.probes.push_back({ProbeKind::integral, 0.0});
  f.terms.push_back({1.0, std::vector<std::size_t>(static_cast<std::size_t>(k), 0)});
  return f;
}

/// exp((lambda/2) int x^2 dt).
inline Functional exp_quadratic(double lambda) {
  Functional f;
  f.name = "exp_quadratic";
  f.probes.push_back({ProbeKind::square_integral, 0.0});
  f.map = [lambda](std::span<const double> v) { return std::exp(0.5 * lambda * v[0]); };
  return f;
}

/// exp(theta int x dt).
inline Functional exp_linear(double theta) {
  Functional f;
  f.name = "exp_linear";
  f.probes.push_back({ProbeKind::integral, 0.0});
  f.map = [theta](std::span<const double> v) { return std::exp(theta * v[0]); };
  return f;
}

/// Product of two polynomial functionals.
inline Functional product(const Functional& a, const Functional& b) {
  if (!a.is_polynomial() || !b.is_polynomial()) throw UnsupportedFunctional("product needs polynomial factors");
  Functional f;
  f.name = a.name + "*" + b.name;
  f.probes = a.probes;
  f.probes.insert(f.probes.end(), b.probes.begin(), b.probes.end());
  const std::size_t off = a.probes.size();
  for (const auto& ta : a.terms)
    for (const auto& tb : b.terms) {
      Functional::Term t{ta.coef * tb.coef, ta.factors};
      for (std::size_t i : tb.factors) t.factors.push_back(i + off);
      f.terms.push_back(std::move(t));
    }
  return f;
}

}  // namespace functionals
}  // namespace bogo
