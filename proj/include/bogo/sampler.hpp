#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "execution.hpp"
#include "functional.hpp"
#include "kernel.hpp"
#include "numerics.hpp"
#include "params.hpp"

/// Exact path samplers and the Monte Carlo estimation engine.
namespace bogo::sampler {

enum class Method { finite_dim, kl };

inline std::string to_string(Method m) { return m == Method::kl ? "kl" : "finite"; }

inline Method parse_method(const std::string& s) {
  if (s == "finite" || s == "finite_dim") return Method::finite_dim;
  if (s == "kl") return Method::kl;
  throw ParameterError("unknown sampling method '" + s + "' (expected finite or kl)");
}

enum class Factorization {
  precision_cholesky,  ///< O(N) per path via the cyclic tridiagonal inverse
  dense_cholesky,      ///< A = L L^T, O(N^2) per path
};

/**
 * Exact draws of (x(t_0), ..., x(t_{N-1})) ~ N(0, A) on t_j = beta j / N.
 */
class FiniteSampler {
 public:
  FiniteSampler(const MeasureParams& p, std::size_t N, Factorization f = Factorization::precision_cholesky)
      : p_(p), n_(N), kind_(N < 3 ? Factorization::dense_cholesky : f) {
    p.validate();
    if (N == 0) throw ParameterError("grid size must be >= 1");
    if (kind_ == Factorization::dense_cholesky) {
      const auto g = kernel::grid_covariance(p, N);
      Eigen::LLT<Eigen::MatrixXd> llt(g.A);
      if (llt.info() != Eigen::Success) throw NumericalError("covariance Cholesky failed");
      L_ = llt.matrixL();
    } else {
      factor_precision();
    }
  }

  std::size_t size() const { return n_; }
  const MeasureParams& params() const { return p_; }

  /// Writes N + 1 values; the last repeats the first.
  template <class Rng>
  void draw(Rng& rng, std::span<double> out) const {
    if (out.size() != n_ + 1) throw ParameterError("FiniteSampler::draw: output must have N + 1 entries");
    std::normal_distribution<double> nd;
    for (std::size_t i = 0; i < n_; ++i) out[i] = nd(rng);
    transform(out.first(n_));
    out[n_] = out[0];
  }

  /// Maps i.i.d. standard normals z (length N) to a draw of N(0, A), in place.
  void transform(std::span<double> z) const {
    const std::size_t n = n_;
    if (kind_ == Factorization::dense_cholesky) {
      Eigen::Map<Eigen::VectorXd> v(z.data(), static_cast<Eigen::Index>(n));
      const Eigen::VectorXd x = L_.triangularView<Eigen::Lower>() * v;
      v = x;
      return;
    }
    // solve L^T x = z
    double* x = z.data();
    x[n - 1] /= d_[n - 1];
    x[n - 2] = (x[n - 2] - r_[n - 2] * x[n - 1]) / d_[n - 2];
    for (std::size_t i = n - 2; i-- > 0;) x[i] = (x[i] - e_[i] * x[i + 1] - r_[i] * x[n - 1]) / d_[i];
  }

  /// Covariance realized by transform(), M M^T; equals A up to rounding.
  Eigen::MatrixXd implied_covariance() const {
    const auto n = static_cast<Eigen::Index>(n_);
    Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index j = 0; j < n; ++j) transform(std::span<double>(M.col(j).data(), n_));
    return M * M.transpose();
  }

  template <class Rng>
  PathSample sample(Rng& rng) const {
    PathSample s{p_.beta, std::vector<double>(n_ + 1)};
    draw(rng, s.values);
    return s;
  }

 private:
  // Cholesky Q = L L^T of the cyclic tridiagonal precision: L has diagonal d,
  // subdiagonal e (rows 1..N-2) and a dense last row r.
  void factor_precision() {
    const auto pe = kernel::precision_entries(p_, n_);
    const double a = pe.diag, b = pe.off;
    const std::size_t n = n_;
    d_.assign(n, 0.0);
    e_.assign(n, 0.0);
    r_.assign(n, 0.0);
    d_[0] = std::sqrt(a);
    e_[0] = b / d_[0];
    r_[0] = b / d_[0];
    for (std::size_t i = 1; i + 2 < n; ++i) {
      d_[i] = std::sqrt(a - e_[i - 1] * e_[i - 1]);
      e_[i] = b / d_[i];
      r_[i] = -r_[i - 1] * e_[i - 1] / d_[i];
    }
    d_[n - 2] = std::sqrt(a - e_[n - 3] * e_[n - 3]);
    r_[n - 2] = (b - r_[n - 3] * e_[n - 3]) / d_[n - 2];
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) s += r_[j] * r_[j];
    const double last = a - s;
    if (!(last > 0.0)) throw NumericalError("precision Cholesky lost positivity");
    d_[n - 1] = std::sqrt(last);
  }

  MeasureParams p_;
  std::size_t n_;
  Factorization kind_;
  Eigen::MatrixXd L_;
  std::vector<double> d_, e_, r_;
};

/// Coefficient view of a truncated Karhunen-Loeve path: x = sum c_n phi_n.
struct KLPath {
  double beta = 1.0;
  long modes = 0;
  std::span<const double> coeff;  ///< c_n for n = -modes..modes

  double probe(const Probe& p) const {
    switch (p.kind) {
      case ProbeKind::point: {
        double s = 0.0;
        for (long n = -modes; n <= modes; ++n)
          s += coeff[static_cast<std::size_t>(n + modes)] * phi(n, p.t);
        return s;
      }
      case ProbeKind::integral:
        return coeff[static_cast<std::size_t>(modes)] * std::sqrt(beta);
      case ProbeKind::square_integral: {
        double s = 0.0;
        for (double c : coeff) s += c * c;
        return s;
      }
    }
    return 0.0;
  }

  double phi(long n, double t) const { return kernel::EigenPair{n, 0.0, beta}.phi(t); }
};

/**
 * Truncated KL sampler: c_n = sqrt(lambda_n) xi_n for |n| <= modes, optionally
 * synthesized on a uniform grid of G intervals.
 */
class KLSampler {
 public:
  KLSampler(const MeasureParams& p, long modes, std::size_t grid = 0) : p_(p), modes_(modes), grid_(grid) {
    p.validate();
    if (modes < 0) throw ParameterError("mode count must be non-negative");
    sqrt_lambda_.resize(static_cast<std::size_t>(2 * modes + 1));
    for (long n = -modes; n <= modes; ++n)
      sqrt_lambda_[static_cast<std::size_t>(n + modes)] = std::sqrt(kernel::eigenvalue(p, n));
    if (grid > 0) {
      phi_.resize(static_cast<Eigen::Index>(grid), static_cast<Eigen::Index>(2 * modes + 1));
      for (std::size_t j = 0; j < grid; ++j) {
        const double t = p.beta * static_cast<double>(j) / static_cast<double>(grid);
        for (long n = -modes; n <= modes; ++n)
          phi_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n + modes)) = kernel::eigenfunction(p, n, t);
      }
    }
  }

  long modes() const { return modes_; }
  std::size_t dim() const { return sqrt_lambda_.size(); }
  std::size_t grid() const { return grid_; }
  const MeasureParams& params() const { return p_; }

  template <class Rng>
  void draw_coefficients(Rng& rng, std::span<double> c) const {
    std::normal_distribution<double> nd;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = sqrt_lambda_[i] * nd(rng);
  }

  /// Columns of C are coefficient vectors; columns of X (grid + 1 rows) get the paths.
  void synthesize(const Eigen::MatrixXd& C, Eigen::MatrixXd& X) const {
    if (grid_ == 0) throw ParameterError("KLSampler built without a grid");
    X.resize(static_cast<Eigen::Index>(grid_ + 1), C.cols());
    X.topRows(static_cast<Eigen::Index>(grid_)).noalias() = phi_ * C;
    X.row(static_cast<Eigen::Index>(grid_)) = X.row(0);
  }

  KLPath view(std::span<const double> c) const { return {p_.beta, modes_, c}; }

 private:
  MeasureParams p_;
  long modes_;
  std::size_t grid_;
  std::vector<double> sqrt_lambda_;
  Eigen::MatrixXd phi_;
};

struct SamplingOptions {
  Method method = Method::finite_dim;
  std::size_t grid = 256;
  long modes = 512;
  std::size_t n_paths = 10000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  ///< separates independent experiments sharing a seed
  unsigned threads = 1;
  std::size_t chunk = 256;
  double max_nonfinite_fraction = 1e-3;
};

/// n_paths x k table of per-path outputs, row-major.
struct SampleMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  SampleMatrix() = default;
  SampleMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::vector<double> column(std::size_t j) const {
    std::vector<double> v(rows);
    for (std::size_t i = 0; i < rows; ++i) v[i] = at(i, j);
    return v;
  }
};

/**
 * Draws opts.n_paths grid paths (grid = opts.grid intervals) and stores
 * fn(i, path, row) for each. Paths come in blocks of opts.chunk; each block
 * owns the generator keyed by (seed, stream, block), so the output depends on
 * the chunk size but never on the thread count. fn must be safe to call
 * concurrently.
 */
template <class Fn>
SampleMatrix simulate_paths(const MeasureParams& p, const SamplingOptions& o, std::size_t k, Fn&& fn) {
  SampleMatrix out(o.n_paths, k);
  const unsigned threads = resolve_threads(o.threads);
  if (o.method == Method::finite_dim) {
    const FiniteSampler s(p, o.grid);
    parallel_chunks(o.n_paths, o.chunk, threads, [&](std::size_t b, std::size_t e) {
      auto rng = path_stream(o.seed, o.stream, b / o.chunk);
      PathSample path{p.beta, std::vector<double>(o.grid + 1)};
      for (std::size_t i = b; i < e; ++i) {
        s.draw(rng, path.values);
        fn(i, static_cast<const PathSample&>(path), out.row(i));
      }
    });
  } else {
    const KLSampler s(p, o.modes, o.grid);
    parallel_chunks(o.n_paths, o.chunk, threads, [&](std::size_t b, std::size_t e) {
      auto rng = path_stream(o.seed, o.stream, b / o.chunk);
      Eigen::MatrixXd C(static_cast<Eigen::Index>(s.dim()), static_cast<Eigen::Index>(e - b)), X;
      for (std::size_t i = b; i < e; ++i)
        s.draw_coefficients(rng, std::span<double>(C.col(static_cast<Eigen::Index>(i - b)).data(), s.dim()));
      s.synthesize(C, X);
      PathSample path{p.beta, std::vector<double>(o.grid + 1)};
      for (std::size_t i = b; i < e; ++i) {
        const auto col = X.col(static_cast<Eigen::Index>(i - b));
        for (std::size_t j = 0; j <= o.grid; ++j) path.values[j] = col(static_cast<Eigen::Index>(j));
        fn(i, static_cast<const PathSample&>(path), out.row(i));
      }
    });
  }
  return out;
}

/// KL draws in coefficient form only (no grid): fn(i, const KLPath&, row).
template <class Fn>
SampleMatrix simulate_kl_coefficients(const MeasureParams& p, const SamplingOptions& o, std::size_t k, Fn&& fn) {
  SampleMatrix out(o.n_paths, k);
  const KLSampler s(p, o.modes, 0);
  parallel_chunks(o.n_paths, o.chunk, resolve_threads(o.threads), [&](std::size_t b, std::size_t e) {
    auto rng = path_stream(o.seed, o.stream, b / o.chunk);
    std::vector<double> c(s.dim());
    for (std::size_t i = b; i < e; ++i) {
      s.draw_coefficients(rng, c);
      fn(i, s.view(c), out.row(i));
    }
  });
  return out;
}

struct EstimateReport {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_nonfinite = 0;
  std::uint64_t seed = 0;
  Method method = Method::finite_dim;
};

namespace detail {
inline void check_nonfinite(std::size_t bad, std::size_t n, const SamplingOptions& o) {
  if (static_cast<double>(bad) > o.max_nonfinite_fraction * static_cast<double>(n))
    throw NumericalError(std::to_string(bad) + " of " + std::to_string(n) +
                         " draws were non-finite (limit " + std::to_string(o.max_nonfinite_fraction) + ")");
}
}  // namespace detail

/// Mean and standard error of column j; non-finite rows are dropped and counted.
inline EstimateReport column_report(const SampleMatrix& s, std::size_t j, const SamplingOptions& o) {
  std::vector<double> v;
  v.reserve(s.rows);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    const double x = s.at(i, j);
    if (std::isfinite(x))
      v.push_back(x);
    else
      ++bad;
  }
  detail::check_nonfinite(bad, s.rows, o);
  const auto st = numerics::mean_stat(v);
  return {st.mean, st.std_error, st.n, bad, o.seed, o.method};
}

/// Column a minus column b, paired per path.
inline EstimateReport difference_report(const SampleMatrix& s, std::size_t a, std::size_t b,
                                        const SamplingOptions& o) {
  std::vector<double> v;
  v.reserve(s.rows);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    const double x = s.at(i, a) - s.at(i, b);
    if (std::isfinite(x))
      v.push_back(x);
    else
      ++bad;
  }
  detail::check_nonfinite(bad, s.rows, o);
  const auto st = numerics::mean_stat(v);
  return {st.mean, st.std_error, st.n, bad, o.seed, o.method};
}

/// Ratio of column means with a delta-method standard error.
inline EstimateReport ratio_report(const SampleMatrix& s, std::size_t num, std::size_t den,
                                   const SamplingOptions& o) {
  std::vector<double> x, y;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    const double a = s.at(i, num), b = s.at(i, den);
    if (std::isfinite(a) && std::isfinite(b)) {
      x.push_back(a);
      y.push_back(b);
    } else {
      ++bad;
    }
  }
  detail::check_nonfinite(bad, s.rows, o);
  const double n = static_cast<double>(x.size());
  const double mx = numerics::pairwise_sum(x) / n, my = numerics::pairwise_sum(y) / n;
  const double r = mx / my;
  std::vector<double> resid(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) resid[i] = (x[i] - r * y[i]) / my;
  const auto st = numerics::mean_stat(resid);
  return {r, st.std_error, x.size(), bad, o.seed, o.method};
}

/**
 * Monte Carlo estimate of E F. Polynomial and probe-map functionals under the
 * KL method are evaluated in coefficient form (exact probes); grid functionals
 * use synthesized grid paths.
 */
inline EstimateReport estimate(const MeasureParams& p, const Functional& F, const SamplingOptions& o) {
  SampleMatrix s;
  if (o.method == Method::kl && !F.needs_grid()) {
    s = simulate_kl_coefficients(p, o, 1,
                                 [&](std::size_t, const KLPath& x, std::span<double> row) { row[0] = evaluate(F, x); });
  } else {
    s = simulate_paths(p, o, 1,
                       [&](std::size_t, const PathSample& x, std::span<double> row) { row[0] = evaluate(F, x); });
  }
  return column_report(s, 0, o);
}

/// Paths exactly as the estimator sees them for the same options.
inline std::vector<PathSample> sample_paths(const MeasureParams& p, const SamplingOptions& o) {
  std::vector<PathSample> out(o.n_paths);
  simulate_paths(p, o, 0, [&](std::size_t i, const PathSample& x, std::span<double>) { out[i] = x; });
  return out;
}

inline std::vector<PathSample> sample_finite(const MeasureParams& p, std::size_t N, std::size_t n_paths,
                                             std::uint64_t seed) {
  SamplingOptions o;
  o.method = Method::finite_dim;
  o.grid = N;
  o.n_paths = n_paths;
  o.seed = seed;
  return sample_paths(p, o);
}

inline std::vector<PathSample> sample_kl(const MeasureParams& p, long modes, std::size_t grid, std::size_t n_paths,
                                         std::uint64_t seed) {
  SamplingOptions o;
  o.method = Method::kl;
  o.grid = grid;
  o.modes = modes;
  o.n_paths = n_paths;
  o.seed = seed;
  return sample_paths(p, o);
}

}  // namespace bogo::sampler
