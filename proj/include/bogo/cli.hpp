#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynamics.hpp"
#include "equilibrium.hpp"
#include "functional.hpp"
#include "json_io.hpp"
#include "kernel.hpp"
#include "oracle.hpp"
#include "potential.hpp"
#include "quadrature.hpp"
#include "sampler.hpp"
#include "trajectories.hpp"
#include "verify.hpp"

/// The `bogo` command line: one subcommand per module, JSON or CSV output.
namespace bogo::cli {

using json = nlohmann::json;

inline constexpr int schema_version = 1;

/// Bad user input detected after CLI parsing (exit code 2).
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Output helpers

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// RFC 4180: CRLF record separators, fields with comma, quote, CR or LF quoted, quotes doubled.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) { row(header); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw std::logic_error("csv row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << escape(cells[i]);
    }
    out_ << "\r\n";
  }

  void row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    for (double v : cells) s.push_back(format_double(v));
    row(s);
  }

  std::string str() const { return out_.str(); }

  static std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

 private:
  std::size_t cols_;
  std::ostringstream out_;
};

// ---------------------------------------------------------------------------
// Functional registry: name(arg, ...) factors joined by '*'

struct FunctionalSpec {
  std::string name;
  std::vector<std::string> args;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

inline double parse_number(const std::string& s, const std::string& what) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ArgumentError("expected a number for " + what + ", got '" + s + "'");
  return v;
}

inline std::vector<FunctionalSpec> parse_functional(const std::string& text) {
  std::vector<FunctionalSpec> out;
  std::size_t i = 0;
  const std::string s = trim(text);
  if (s.empty()) throw ArgumentError("empty functional");
  while (i < s.size()) {
    FunctionalSpec f;
    const auto open = s.find_first_of("(*", i);
    f.name = trim(s.substr(i, open == std::string::npos ? std::string::npos : open - i));
    if (f.name.empty()) throw ArgumentError("malformed functional '" + text + "'");
    i = open == std::string::npos ? s.size() : open;
    if (i < s.size() && s[i] == '(') {
      const auto close = s.find(')', i);
      if (close == std::string::npos) throw ArgumentError("unbalanced parenthesis in '" + text + "'");
      std::stringstream ss(s.substr(i + 1, close - i - 1));
      for (std::string a; std::getline(ss, a, ',');)
        if (!trim(a).empty()) f.args.push_back(trim(a));
      i = close + 1;
      while (i < s.size() && s[i] == ' ') ++i;
    }
    out.push_back(std::move(f));
    if (i < s.size()) {
      if (s[i] != '*') throw ArgumentError("expected '*' between factors in '" + text + "'");
      ++i;
    }
  }
  return out;
}

namespace detail {
inline void arity(const FunctionalSpec& f, std::size_t lo, std::size_t hi) {
  if (f.args.size() < lo || f.args.size() > hi)
    throw ArgumentError(f.name + " takes " + (lo == hi ? std::to_string(lo) : std::to_string(lo) + ".." + std::to_string(hi)) +
                        " argument(s), got " + std::to_string(f.args.size()));
}

inline Potential potential_arg(const FunctionalSpec& f) {
  arity(f, 1, 2);
  return potentials::by_name(f.args[0], f.args.size() > 1 ? parse_number(f.args[1], f.name + " coupling") : 1.0);
}
}  // namespace detail

/**
 * Registry: const(c), monomial(t1, ...), time_square_integral, integral_power(k),
 * exp_quadratic(lambda), exp_linear(theta), exp_potential(V[, coupling]) = e^{-int V},
 * q2_potential(V[, coupling]) = x(0)^2 e^{-int V}. Polynomial factors multiply with '*'.
 */
inline Functional build_functional(const FunctionalSpec& f) {
  if (f.name == "const") {
    detail::arity(f, 1, 1);
    return functionals::constant(parse_number(f.args[0], "const"));
  }
  if (f.name == "monomial") {
    std::vector<double> t;
    for (const auto& a : f.args) t.push_back(parse_number(a, "monomial time"));
    return functionals::monomial(t);
  }
  if (f.name == "time_square_integral") {
    detail::arity(f, 0, 0);
    return functionals::time_square_integral();
  }
  if (f.name == "integral_power") {
    detail::arity(f, 1, 1);
    const double k = parse_number(f.args[0], "integral_power");
    if (k < 0 || k != std::floor(k)) throw ArgumentError("integral_power needs a non-negative integer");
    return functionals::integral_power(static_cast<int>(k));
  }
  if (f.name == "exp_quadratic") {
    detail::arity(f, 1, 1);
    return functionals::exp_quadratic(parse_number(f.args[0], "exp_quadratic"));
  }
  if (f.name == "exp_linear") {
    detail::arity(f, 1, 1);
    return functionals::exp_linear(parse_number(f.args[0], "exp_linear"));
  }
  if (f.name == "exp_potential" || f.name == "q2_potential") {
    const Potential V = detail::potential_arg(f);
    const bool q2 = f.name == "q2_potential";
    Functional F;
    F.name = f.name;
    F.path_map = [V, q2](const PathSample& x) {
      const double w = std::exp(-equilibrium::action(x, V));
      return q2 ? x.values[0] * x.values[0] * w : w;
    };
    return F;
  }
  throw ArgumentError("unknown functional '" + f.name +
                      "' (const, monomial, time_square_integral, integral_power, exp_quadratic, exp_linear, "
                      "exp_potential, q2_potential)");
}

inline Functional build_functional(const std::vector<FunctionalSpec>& specs) {
  Functional F = build_functional(specs.front());
  for (std::size_t i = 1; i < specs.size(); ++i) {
    const Functional G = build_functional(specs[i]);
    if (!F.is_polynomial() || !G.is_polynomial()) throw ArgumentError("only polynomial factors can be multiplied");
    F = functionals::product(F, G);
  }
  return F;
}

/// Monomial times when every factor is a monomial (product included); nullopt otherwise.
inline std::optional<std::vector<double>> monomial_times(const std::vector<FunctionalSpec>& specs) {
  std::vector<double> t;
  for (const auto& f : specs) {
    if (f.name != "monomial") return std::nullopt;
    for (const auto& a : f.args) t.push_back(parse_number(a, "monomial time"));
  }
  return t;
}

/// E F under the Bogolyubov measure where a closed form or the Wick oracle applies.
inline std::optional<double> exact_expectation(const MeasureParams& p, const std::vector<FunctionalSpec>& specs) {
  if (auto t = monomial_times(specs)) return oracle::wick_moment(p, *t, {oracle::wick_hard_cap});
  if (specs.size() != 1) return std::nullopt;
  const auto& f = specs.front();
  if (f.name == "const") return parse_number(f.args[0], "const");
  if (f.name == "time_square_integral") return kernel::trace(p);
  if (f.name == "integral_power") {
    // int x ~ N(0, beta/(m omega^2))
    const int k = static_cast<int>(parse_number(f.args[0], "integral_power"));
    if (k % 2) return 0.0;
    double dfact = 1.0;
    for (int j = k - 1; j > 1; j -= 2) dfact *= j;
    return dfact * std::pow(p.beta / p.stiffness(), 0.5 * k);
  }
  if (f.name == "exp_quadratic") return oracle::exp_quadratic(p, parse_number(f.args[0], "exp_quadratic"));
  if (f.name == "exp_linear") {
    const double th = parse_number(f.args[0], "exp_linear");
    return std::exp(th * th * p.beta / (2.0 * p.stiffness()));
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Command plumbing

struct CommonOptions {
  double m = 1.0, omega = 1.0, beta = 1.0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out;
  std::string format;
  std::string config;
};

/// Options that change how a run executes but never what it computes; left out of the config echo.
inline bool execution_only(const std::string& name) { return name == "threads" || name == "out" || name == "config"; }

inline std::string join(const std::vector<std::string>& v, const std::string& sep = ",") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

/// Flat {flag name: value} for every option that has a value; feeding it back via --config reproduces the run.
inline json echo_config(const CLI::App& sub) {
  json c = json::object();
  c["command"] = sub.get_name();
  for (const CLI::Option* o : sub.get_options()) {
    const std::string name = o->get_single_name();
    if (name.empty() || name == "help" || execution_only(name)) continue;
    if (o->get_type_size() == 0) {
      if (o->count() > 0) c[name] = true;
      continue;
    }
    const std::string v = o->count() > 0 ? join(o->reduced_results()) : o->get_default_str();
    if (!v.empty()) c[name] = v;
  }
  return c;
}

/// Arguments from a flat JSON config, spliced before the user's flags so the flags win.
inline std::vector<std::string> config_arguments(const std::string& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ArgumentError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ArgumentError("config file must hold a JSON object");
  std::vector<std::string> args;
  for (const auto& [k, v] : j.items()) {
    if (k == "command") {
      if (!v.is_string() || v.get<std::string>() != command)
        throw ArgumentError("config is for command '" + v.dump() + "', not '" + command + "'");
      continue;
    }
    if (execution_only(k)) throw ArgumentError("config may not set '" + k + "'");
    if (v.is_boolean()) {
      if (v.get<bool>()) args.push_back("--" + k);
      continue;
    }
    std::string s;
    if (v.is_string()) {
      s = v.get<std::string>();
    } else if (v.is_number()) {
      s = v.is_number_float() ? format_double(v.get<double>()) : v.dump();
    } else if (v.is_array()) {
      std::vector<std::string> parts;
      for (const auto& e : v) parts.push_back(e.is_string() ? e.get<std::string>() : e.dump());
      s = join(parts);
    } else {
      throw ArgumentError("config value for '" + k + "' must be a string, number, boolean or array");
    }
    args.push_back("--" + k);
    args.push_back(s);
  }
  return args;
}

struct Output {
  std::string text;
  bool ok = true;  ///< verify sets false when a criterion fails
};

inline json envelope(const CLI::App& sub, json result) {
  return {{"schema_version", schema_version}, {"command", sub.get_name()}, {"config", echo_config(sub)},
          {"result", std::move(result)}};
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Subcommands

inline json params_json(const MeasureParams& p) { return p; }

inline Output cmd_kernel(const CLI::App& sub, const MeasureParams& p, const CommonOptions& c, std::optional<double> t,
                         std::optional<double> s, std::optional<long> n_max, std::optional<std::size_t> grid) {
  if (t.has_value() != s.has_value()) throw ArgumentError("kernel: give both --t and --s");
  if (n_max && *n_max < 0) throw ArgumentError("--n-max must be non-negative");
  json r = {{"params", params_json(p)}, {"variance", kernel::variance(p)}, {"trace", kernel::trace(p)}};
  if (t) {
    json v = {{"t", *t}, {"s", *s}, {"value", kernel::covariance(p, *t, *s)}};
    if (n_max) v["truncated"] = {{"n_max", *n_max}, {"value", kernel::truncated_covariance(p, *t, *s, *n_max)}};
    r["covariance"] = v;
  }
  if (n_max && !t) {
    json table = json::array();
    for (const auto& e : kernel::eigen_system(p, *n_max)) table.push_back({{"n", e.n}, {"lambda", e.lambda}});
    r["eigen"] = table;
    r["eigen_tail_bound"] = kernel::eigen_tail_bound(p, *n_max, 1);
  }
  std::optional<kernel::GridCovariance> g;
  if (grid) {
    g = kernel::grid_covariance(p, *grid);
    const auto e = kernel::precision_entries(p, *grid);
    const auto n = static_cast<Eigen::Index>(*grid);
    const double resid = (g->A * g->A_inv - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    r["grid"] = {{"N", *grid},           {"theta", g->theta()},
                 {"precision_diag", e.diag}, {"precision_off", e.off},
                 {"log_det_A_inv", g->log_det_A_inv}, {"det_A_inv", g->det_A_inv},
                 {"max_abs_identity_residual", resid}, {"warnings", g->warnings}};
  }
  if (c.format == "csv") {
    if (n_max && !t) {
      CsvWriter w({"n", "lambda"});
      for (const auto& e : kernel::eigen_system(p, *n_max))
        w.row(std::vector<std::string>{std::to_string(e.n), format_double(e.lambda)});
      return {w.str()};
    }
    if (g) {
      CsvWriter w({"j", "k", "A", "A_inv"});
      for (Eigen::Index j = 0; j < g->A.rows(); ++j)
        for (Eigen::Index k = 0; k < g->A.cols(); ++k)
          w.row(std::vector<std::string>{std::to_string(j), std::to_string(k), format_double(g->A(j, k)),
                                         format_double(g->A_inv(j, k))});
      return {w.str()};
    }
    throw ArgumentError("kernel: csv output needs --n-max (eigen table) or --grid (matrices)");
  }
  return {dump(envelope(sub, r))};
}

struct OracleArgs {
  std::string quantity;
  std::vector<double> times;
  double lambda = 0.5;
  long n_max = 100000;
  int k = 1;
  double a = 0.0, b = 1.0;
};

inline Output cmd_oracle(const CLI::App& sub, const MeasureParams& p, const OracleArgs& o) {
  json r = {{"quantity", o.quantity}, {"params", params_json(p)}};
  json d = json::object();
  if (o.quantity == "wick") {
    r["value"] = oracle::wick_moment(p, o.times, {oracle::wick_hard_cap});
    d["degree"] = o.times.size();
    double pairings = o.times.size() % 2 ? 0.0 : 1.0;
    for (std::size_t j = o.times.size() % 2 ? 0 : o.times.size() - 1; j > 1; j -= 2) pairings *= static_cast<double>(j);
    d["pairings"] = pairings;
  } else if (o.quantity == "det" || o.quantity == "exp-quad") {
    const double D = oracle::fredholm_det(p, o.lambda);
    const auto tr = oracle::fredholm_det_truncated(p, o.lambda, o.n_max);
    const auto tc = oracle::fredholm_det_tail_corrected(p, o.lambda, o.n_max);
    r["lambda"] = o.lambda;
    r["value"] = o.quantity == "det" ? D : oracle::exp_quadratic(p, o.lambda);
    d = {{"fredholm_det", D},
         {"truncation_order", o.n_max},
         {"truncated_product", tr.value},
         {"truncated_tail_bound", tr.tail_bound},
         {"tail_corrected_product", tc.value},
         {"tail_corrected_bound", tc.tail_bound}};
  } else if (o.quantity == "moment") {
    const auto m = oracle::moment_mk(p, o.k);
    r["k"] = o.k;
    r["value"] = m.value;
    d = {{"contour_radius", m.radius}, {"contour_nodes", m.nodes}};
  } else if (o.quantity == "exp-aq2") {
    r["a"] = o.a;
    r["value"] = oracle::exp_a_qsquared(p, o.a);
  } else if (o.quantity == "product") {
    const auto s = oracle::infinite_product(o.a, o.b, o.n_max);
    r["a"] = o.a;
    r["b"] = o.b;
    r["value"] = s.value;
    d = {{"truncation_order", o.n_max}, {"tail_bound", s.tail_bound}};
    if (o.b > 0.0 && o.a > -o.b * o.b) d["limit"] = oracle::infinite_product_limit(o.a, o.b);
  } else {
    throw ArgumentError("unknown --quantity '" + o.quantity + "'");
  }
  r["diagnostics"] = d;
  return {dump(envelope(sub, r))};
}

struct SamplingArgs {
  std::string method = "finite";
  std::size_t paths = 10000;
  std::size_t grid = 256;
  long modes = 512;
  std::size_t chunk = 256;
};

inline sampler::SamplingOptions sampling(const SamplingArgs& a, const CommonOptions& c) {
  sampler::SamplingOptions o;
  o.method = sampler::parse_method(a.method);
  o.n_paths = a.paths;
  o.grid = a.grid;
  o.modes = a.modes;
  o.chunk = a.chunk;
  o.seed = c.seed;
  o.threads = c.threads;
  return o;
}

inline Output cmd_sample(const CLI::App& sub, const MeasureParams& p, const CommonOptions& c, const SamplingArgs& a) {
  auto o = sampling(a, c);
  if (o.grid == 0) throw ArgumentError("--grid must be positive");
  const auto paths = sampler::sample_paths(p, o);
  if (c.format == "csv") {
    CsvWriter w({"path", "t", "value"});
    for (std::size_t i = 0; i < paths.size(); ++i)
      for (std::size_t j = 0; j < paths[i].values.size(); ++j)
        w.row(std::vector<std::string>{std::to_string(i), format_double(paths[i].time(j)),
                                       format_double(paths[i].values[j])});
    return {w.str()};
  }
  json r = {{"params", params_json(p)}, {"times", json::array()}, {"paths", json::array()}};
  if (!paths.empty())
    for (std::size_t j = 0; j < paths[0].values.size(); ++j) r["times"].push_back(paths[0].time(j));
  for (const auto& x : paths) r["paths"].push_back(x.values);
  return {dump(envelope(sub, r))};
}

inline Output cmd_estimate(const CLI::App& sub, const MeasureParams& p, const CommonOptions& c, const SamplingArgs& a,
                           const std::string& functional) {
  const auto specs = parse_functional(functional);
  const auto F = build_functional(specs);
  const auto rep = sampler::estimate(p, F, sampling(a, c));
  json r = {{"params", params_json(p)}, {"functional", functional}, {"report", rep}};
  if (const auto ex = exact_expectation(p, specs)) {
    r["oracle"] = *ex;
    r["sigmas"] = rep.std_error > 0 ? std::abs(rep.estimate - *ex) / rep.std_error : 0.0;
  }
  return {dump(envelope(sub, r))};
}

struct QuadArgs {
  std::string rule = "thm1";
  int n = 1;
  std::optional<double> A;
  std::string rho = "cont";
  std::size_t bands = 33;
  std::string band_weights = "geometric";
  long k_max = 2000;
  std::size_t order = 24, panels = 1;
  std::string scaling = "eq31";
  std::string functional;
};

inline Output cmd_quad(const CLI::App& sub, const MeasureParams& p, const QuadArgs& q) {
  const auto specs = parse_functional(q.functional);
  const auto F = build_functional(specs);
  quadrature::QuadOptions qo;
  qo.order = q.order;
  qo.panels = q.panels;
  json r = {{"params", params_json(p)}, {"functional", q.functional}, {"rule", q.rule}};
  std::complex<double> value;
  std::optional<double> exact;
  if (q.rule == "thm1" || q.rule == "thm2") {
    const auto scaling = q.scaling == "eq31" ? quadrature::Scaling::eq31 : quadrature::Scaling::inv_sqrt_factorial;
    auto apply = [&](const auto& rho) {
      return q.rule == "thm1" ? quadrature::thm1_integrate(rho, F, q.n, qo)
                              : quadrature::thm2_integrate(rho, F, q.n, q.A.value_or(q.n + 1.0), qo, scaling);
    };
    quadrature::QuadResult res;
    if (q.rho == "cont") {
      res = apply(quadrature::ContinuousRho(p, qo));
      exact = exact_expectation(p, specs);
    } else {
      const auto kind = q.band_weights == "spectral" ? quadrature::BandWeights::spectral : quadrature::BandWeights::geometric;
      res = apply(quadrature::DiscreteRho(p, q.bands, kind));
      // the discrete rule targets the kernel truncated to the band modes
      if (const auto t = monomial_times(specs); t && q.bands % 2 == 1) {
        const long nm = static_cast<long>(q.bands / 2);
        exact = oracle::wick_moment([&](double a, double b) { return kernel::truncated_covariance(p, a, b, nm); }, *t,
                                    {oracle::wick_hard_cap});
      }
    }
    value = res.value;
    r["n"] = q.n;
    r["rho"] = res.rho;
    r["method"] = res.method;
    if (q.rule == "thm2") {
      r["A"] = q.A.value_or(q.n + 1.0);
      r["scaling"] = res.scaling;
    }
  } else if (q.rule == "thm3") {
    const auto rule = quadrature::thm3_square_weight_rule(p, q.k_max);
    value = quadrature::eigen_rule_integrate(rule, F);
    r["weight"] = "int x^2 dt";
    r["k_max"] = q.k_max;
    r["A"] = rule.A;
    // E[int x^2 * F] for monomial F: integrate the Wick moment over the squared time
    if (const auto t = monomial_times(specs)) {
      auto breaks = *t;
      const auto gl = numerics::composite_gauss_legendre(0.0, p.beta, breaks, 20, 2);
      double acc = 0.0;
      for (std::size_t i = 0; i < gl.size(); ++i) {
        auto tt = *t;
        tt.push_back(gl.nodes[i]);
        tt.push_back(gl.nodes[i]);
        acc += gl.weights[i] * oracle::wick_moment(p, tt, {oracle::wick_hard_cap});
      }
      exact = acc;
    } else if (specs.size() == 1 && specs[0].name == "time_square_integral") {
      exact = oracle::moment_mk(p, 2).value;
    }
  } else if (q.rule == "thm4") {
    const auto rule = quadrature::thm4_rule(p, q.k_max);
    value = quadrature::eigen_rule_integrate(rule, F);
    r["k_max"] = q.k_max;
    r["A"] = rule.A;
    r["A_closed"] = quadrature::thm4_A_closed(p);
    exact = exact_expectation(p, specs);
  } else {
    throw ArgumentError("unknown --rule '" + q.rule + "' (thm1, thm2, thm3, thm4)");
  }
  r["value"] = value.real();
  r["value_imag"] = value.imag();
  if (exact) {
    r["oracle"] = *exact;
    r["abs_error"] = std::abs(value - *exact);
    r["rel_error"] = *exact != 0.0 ? std::abs(value - *exact) / std::abs(*exact) : std::abs(value - *exact);
  } else {
    r["oracle"] = nullptr;
  }
  return {dump(envelope(sub, r))};
}

inline Output cmd_qvar(const CLI::App& sub, const MeasureParams& p, const CommonOptions& c,
                       const std::vector<std::size_t>& Ns, std::size_t paths) {
  std::vector<trajectories::QVarReport> reps;
  for (std::size_t N : Ns) {
    if (N == 0) throw ArgumentError("--N-list entries must be positive");
    sampler::SamplingOptions o;
    o.n_paths = paths;
    o.grid = N;
    o.seed = c.seed;
    o.stream = N;
    o.threads = c.threads;
    reps.push_back(trajectories::qvar_report(p, N, o));
  }
  if (c.format == "csv") {
    CsvWriter w({"N", "exact_mean", "exact_I_N", "sample_mean", "sample_var", "sample_mean_se", "exact_var",
                 "sample_I_N", "sample_I_N_se"});
    for (const auto& r : reps)
      w.row(std::vector<std::string>{std::to_string(r.N), format_double(r.exact_mean), format_double(r.exact_I_N),
                                     format_double(r.sample_mean), format_double(r.sample_var),
                                     format_double(r.sample_mean_se), format_double(r.exact_var),
                                     format_double(r.sample_I_N), format_double(r.sample_I_N_se)});
    return {w.str()};
  }
  return {dump(envelope(sub, {{"params", params_json(p)}, {"limit_beta_over_m", p.beta / p.m}, {"rows", reps}}))};
}

struct FKArgs {
  std::string potential = "quadratic";
  double kappa = 1.0, g = 1.0, c = 1.0;
  double beta_max = 1.0;
  std::size_t n_beta = 200, n_xi = 401, n_quad = 24;
  double xi_max = 0.0;
  std::size_t mc_paths = 0, mc_grid = 256;
  double eps = 0.02;
  std::vector<double> xi_list{-1.0, -0.5, 0.0, 0.5, 1.0};
  std::size_t slice_every = 20;
};

inline Potential fk_potential(const FKArgs& a) {
  if (a.potential == "quadratic") return potentials::quadratic(a.kappa);
  if (a.potential == "quartic") return potentials::quartic(a.g);
  if (a.potential == "constant") return potentials::constant(a.c);
  if (a.potential == "zero") return potentials::zero();
  throw ArgumentError("unknown --potential '" + a.potential + "' (zero, constant, quadratic, quartic)");
}

inline Output cmd_fk(const CLI::App& sub, const MeasureParams& p, const CommonOptions& c, const FKArgs& a) {
  const Potential V = fk_potential(a);
  dynamics::FKOptions fo;
  fo.beta_max = a.beta_max;
  fo.n_beta = a.n_beta;
  fo.n_xi = a.n_xi;
  fo.xi_max = a.xi_max;
  fo.n_quad = a.n_quad;
  fo.threads = c.threads;
  const auto sol = dynamics::fk_solve_volterra(p, V, fo);
  const std::size_t last = sol.beta_grid.size() - 1;
  if (c.format == "csv") {
    if (a.slice_every == 0) throw ArgumentError("--slice-every must be positive");
    CsvWriter w({"beta", "xi", "u"});
    for (std::size_t i = 0; i <= last; ++i) {
      if ((i + 1) % a.slice_every != 0 && i != last) continue;
      for (std::size_t j = 0; j < sol.xi_grid.size(); ++j) w.row({sol.beta_grid[i], sol.xi_grid[j], sol.u(i, j)});
    }
    return {w.str()};
  }
  json rows = json::array();
  std::vector<sampler::EstimateReport> mc;
  if (a.mc_paths > 0) {
    sampler::SamplingOptions o;
    o.n_paths = a.mc_paths;
    o.grid = a.mc_grid;
    o.seed = c.seed;
    o.threads = c.threads;
    mc = dynamics::fk_estimate_mc(p, V, a.beta_max, a.xi_list, a.eps, o);
  }
  const double h = 1e-2;
  for (std::size_t k = 0; k < a.xi_list.size(); ++k) {
    const double xi = a.xi_list[k];
    const double u = sol.at(last, xi);
    json row = {{"xi", xi}, {"volterra", u}, {"free", dynamics::fk_free(p, a.beta_max, xi)}};
    if (V.name == "quadratic" && a.kappa > 0)
      row["mehler"] = reference::mehler_kernel(p.stiffness(), a.kappa, a.beta_max, xi);
    if (!mc.empty()) {
      const double upp = (sol.at(last, xi + h) - 2 * u + sol.at(last, xi - h)) / (h * h);
      const double bias = 0.5 * a.eps * a.eps * std::abs(upp);
      row["mc"] = mc[k];
      row["mollifier_bias_bound"] = bias;
      row["mc_within_tolerance"] = std::abs(mc[k].estimate - u) <= 4 * mc[k].std_error + bias;
    }
    rows.push_back(row);
  }
  json r = {{"params", params_json(p)},
            {"potential", V.name},
            {"coupling", V.coupling},
            {"beta_max", a.beta_max},
            {"n_beta", a.n_beta},
            {"n_xi", sol.xi_grid.size()},
            {"xi_max", sol.xi_grid.back()},
            {"pde_residual", dynamics::fk_pde_residual(sol, V, 0.5 * a.beta_max)},
            {"slices", rows}};
  return {dump(envelope(sub, r))};
}

struct EquilibriumArgs {
  std::string potential = "quartic";
  double g = 1.0;
  std::vector<double> h_list{0.25, 0.5, 1.0};
  std::size_t paths = 100000, grid = 64;
  bool average_grid = false;
};

inline Output cmd_equilibrium(const CLI::App& sub, const MeasureParams& p, const CommonOptions& c,
                              const EquilibriumArgs& a) {
  const Potential V = potentials::by_name(a.potential, a.g);
  sampler::SamplingOptions o;
  o.n_paths = a.paths;
  o.grid = a.grid;
  o.seed = c.seed;
  o.threads = c.threads;
  const auto dom = equilibrium::domination_check(p, V, a.h_list, o);
  o.stream = 1;
  const auto q2 = equilibrium::mean_square_q(p, V, o, a.average_grid);
  const double bound = kernel::variance(p);
  const bool q_ok = q2.estimate <= bound + 4.0 * q2.std_error;
  json r = {{"params", params_json(p)},
            {"potential", V.name},
            {"coupling", V.coupling},
            {"domination", dom},
            {"mean_square_q", q2},
            {"q2_bound", bound},
            {"falk_bruch", equilibrium::falk_bruch_bound(p)},
            {"summary", {{"domination_ok", dom.all_ok()}, {"q2_bound_ok", q_ok}}}};
  return {dump(envelope(sub, r))};
}

inline Output cmd_verify(const CLI::App& sub, const CommonOptions& c, bool quick, const std::vector<int>& only,
                         std::ostream& err) {
  verify::VerifyOptions v;
  v.quick = quick;
  v.seed = c.seed;
  v.threads = c.threads;
  v.only = only;
  const auto rep = verify::run(v, [&](const verify::CriterionResult& r) {
    err << (r.passed ? "PASS" : "FAIL") << "  criterion " << r.id << ": " << r.name << "\n";
  });
  return {dump(envelope(sub, rep)), rep.all_passed()};
}

// ---------------------------------------------------------------------------

/**
 * Exit codes: 0 success, 1 numerical failure (diagnostic JSON written) or a
 * failed verify criterion, 2 argument error (usage on err, nothing written).
 */
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Gaussian periodic path measure toolkit", "bogo"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  CommonOptions c;
  std::optional<double> kt, ks;
  std::optional<long> kn;
  std::optional<std::size_t> kg;
  OracleArgs oa;
  SamplingArgs sa;
  std::string functional;
  QuadArgs qa;
  std::vector<std::size_t> qvar_N{8, 16, 32, 64};
  std::size_t qvar_paths = 10000;
  FKArgs fa;
  EquilibriumArgs ea;
  bool quick = false;
  std::vector<int> only;
  std::string seed_text;

  auto common = [&](CLI::App* s, bool needs_seed) {
    s->add_option("--m", c.m, "mass")->check(CLI::PositiveNumber);
    s->add_option("--omega", c.omega, "frequency")->check(CLI::PositiveNumber);
    s->add_option("--beta", c.beta, "inverse temperature (period)")->check(CLI::PositiveNumber);
    s->add_option("--format", c.format, "output format")->check(CLI::IsMember({"json", "csv"}));
    s->add_option("--out", c.out, "output file (default stdout)");
    s->add_option("--config", c.config, "JSON file of flag defaults; flags override it");
    s->add_option("--threads", c.threads, "worker threads (0: BOGO_THREADS, else 1)");
    if (needs_seed) s->add_option("--seed", seed_text, "random seed (required)");
  };
  auto vec_opt = [](CLI::App* s, const std::string& name, auto& v, const std::string& desc) {
    std::vector<std::string> parts;
    for (const auto& e : v) {
      std::ostringstream os;
      os << e;
      parts.push_back(os.str());
    }
    return s->add_option(name, v, desc)->delimiter(',')->default_str(join(parts))->multi_option_policy(
        CLI::MultiOptionPolicy::TakeAll);
  };

  auto* k = app.add_subcommand("kernel", "covariance, eigen table or grid matrices");
  common(k, false);
  k->add_option("--t", kt, "first time");
  k->add_option("--s", ks, "second time");
  k->add_option("--n-max", kn, "eigen table / truncation order");
  k->add_option("--grid", kg, "grid size N for the covariance matrix and its closed-form inverse");

  auto* o = app.add_subcommand("oracle", "closed-form and series oracles");
  common(o, false);
  o->add_option("--quantity", oa.quantity, "quantity")
      ->required()
      ->check(CLI::IsMember({"wick", "det", "exp-quad", "moment", "exp-aq2", "product"}));
  vec_opt(o, "--times", oa.times, "times for wick");
  o->add_option("--lambda", oa.lambda, "lambda for det and exp-quad");
  o->add_option("--n-max", oa.n_max, "truncation order for series diagnostics");
  o->add_option("--k", oa.k, "moment order");
  o->add_option("--a", oa.a, "a for exp-aq2 and product");
  o->add_option("--b", oa.b, "b for product");

  auto sampling_opts = [&](CLI::App* s) {
    s->add_option("--method", sa.method, "sampler")->check(CLI::IsMember({"finite", "kl"}));
    s->add_option("--paths", sa.paths, "number of paths");
    s->add_option("--grid", sa.grid, "grid intervals");
    s->add_option("--modes", sa.modes, "KL modes per sign");
    s->add_option("--chunk", sa.chunk, "paths per random stream block");
  };
  auto* sp = app.add_subcommand("sample", "dump sampled paths");
  common(sp, true);
  sampling_opts(sp);
  auto* es = app.add_subcommand("estimate", "Monte Carlo estimate of a registry functional");
  common(es, true);
  sampling_opts(es);
  es->add_option("--functional", functional, "e.g. monomial(0.1,0.5) or exp_quadratic(0.5)")->required();

  auto* qd = app.add_subcommand("quad", "functional quadrature rules");
  common(qd, false);
  qd->add_option("--rule", qa.rule, "rule")->check(CLI::IsMember({"thm1", "thm2", "thm3", "thm4"}));
  qd->add_option("--n", qa.n, "rule order");
  qd->add_option("--A", qa.A, "thm2 parameter (default n + 1)");
  qd->add_option("--rho", qa.rho, "rho family")->check(CLI::IsMember({"cont", "disc"}));
  qd->add_option("--bands", qa.bands, "discrete rho band count");
  qd->add_option("--band-weights", qa.band_weights, "discrete rho weights")
      ->check(CLI::IsMember({"geometric", "spectral"}));
  qd->add_option("--k-max", qa.k_max, "eigen-rule truncation for thm3/thm4");
  qd->add_option("--order", qa.order, "Gauss-Legendre order per panel");
  qd->add_option("--panels", qa.panels, "Gauss-Legendre panels per piece");
  qd->add_option("--scaling", qa.scaling, "thm2 node scaling")->check(CLI::IsMember({"eq31", "factorial"}));
  qd->add_option("--functional", qa.functional, "registry functional")->required();

  auto* qv = app.add_subcommand("qvar", "quadratic variation table");
  common(qv, true);
  vec_opt(qv, "--N-list", qvar_N, "partition sizes");
  qv->add_option("--paths", qvar_paths, "paths per N");

  auto* fk = app.add_subcommand("fk", "Feynman-Kac Volterra solution and MC cross-check");
  common(fk, true);
  fk->add_option("--potential", fa.potential, "potential")->check(CLI::IsMember({"zero", "constant", "quadratic", "quartic"}));
  fk->add_option("--kappa", fa.kappa, "quadratic coupling");
  fk->add_option("--g", fa.g, "quartic coupling");
  fk->add_option("--c", fa.c, "constant potential value");
  fk->add_option("--beta-max", fa.beta_max, "largest beta");
  fk->add_option("--n-beta", fa.n_beta, "beta steps");
  fk->add_option("--n-xi", fa.n_xi, "xi grid points");
  fk->add_option("--xi-max", fa.xi_max, "xi half-width (0: automatic)");
  fk->add_option("--n-quad", fa.n_quad, "initial Gauss-Hermite order");
  fk->add_option("--mc-paths", fa.mc_paths, "MC paths for the cross-check (0: none)");
  fk->add_option("--mc-grid", fa.mc_grid, "MC grid intervals");
  fk->add_option("--eps", fa.eps, "mollifier width");
  vec_opt(fk, "--xi-list", fa.xi_list, "xi values reported");
  fk->add_option("--slice-every", fa.slice_every, "csv: every k-th beta slice");

  auto* eq = app.add_subcommand("equilibrium", "Gaussian domination and <q^2> bounds");
  common(eq, true);
  eq->add_option("--potential", ea.potential, "potential")->check(CLI::IsMember({"zero", "constant", "quadratic", "quartic"}));
  eq->add_option("--g", ea.g, "coupling");
  vec_opt(eq, "--h-list", ea.h_list, "shifts h");
  eq->add_option("--paths", ea.paths, "paths");
  eq->add_option("--grid", ea.grid, "grid intervals");
  eq->add_flag("--average-grid", ea.average_grid, "average q^2 over the grid");

  auto* vf = app.add_subcommand("verify", "acceptance suite");
  common(vf, false);
  vf->add_option("--seed", seed_text, "random seed")->default_str("20251015");
  vf->add_flag("--quick", quick, "reduced sample sizes");
  vec_opt(vf, "--only", only, "criterion ids");

  // splice config defaults in front of the user's flags
  std::vector<std::string> args(argv + 1, argv + argc);
  CLI::App* active = nullptr;
  try {
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
      if (args[i] == "--config") c.config = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) c.config = args[i].substr(9);
    if (args.empty()) throw CLI::CallForHelp();
    if (!c.config.empty()) {
      const auto extra = config_arguments(c.config, args[0]);
      args.insert(args.begin() + 1, extra.begin(), extra.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
    for (auto* s : app.get_subcommands()) active = s;
    if (!active) throw ArgumentError("no subcommand");
    c.format = c.format.empty() ? (active == sp || active == qv ? "csv" : "json") : c.format;
    if (auto* so = active->get_option_no_throw("--seed")) {
      if (active != vf && so->count() == 0)
        throw ArgumentError(active->get_name() + " draws random numbers and needs --seed (no implicit seed)");
      const std::string txt = seed_text.empty() ? "20251015" : seed_text;
      const auto r = std::from_chars(txt.data(), txt.data() + txt.size(), c.seed);
      if (r.ec != std::errc() || r.ptr != txt.data() + txt.size())
        throw ArgumentError("--seed must be a non-negative integer, got '" + txt + "'");
    }
    if (c.format == "csv" && (active == o || active == es || active == qd || active == eq || active == vf))
      throw ArgumentError(active->get_name() + " writes JSON only");
    c.threads = resolve_threads(c.threads);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (active ? active->help() : app.help());
      return 0;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\nrun 'bogo --help' for usage\n";
    return 2;
  }

  Output res;
  try {
    const MeasureParams p = MeasureParams::make(c.m, c.omega, c.beta);
    if (active == k) res = cmd_kernel(*k, p, c, kt, ks, kn, kg);
    else if (active == o) res = cmd_oracle(*o, p, oa);
    else if (active == sp) res = cmd_sample(*sp, p, c, sa);
    else if (active == es) res = cmd_estimate(*es, p, c, sa, functional);
    else if (active == qd) res = cmd_quad(*qd, p, qa);
    else if (active == qv) res = cmd_qvar(*qv, p, c, qvar_N, qvar_paths);
    else if (active == fk) res = cmd_fk(*fk, p, c, fa);
    else if (active == eq) res = cmd_equilibrium(*eq, p, c, ea);
    else if (active == vf) res = cmd_verify(*vf, c, quick, only, err);
  } catch (const NumericalError& e) {
    const json diag = {{"schema_version", schema_version}, {"command", active->get_name()},
                       {"config", echo_config(*active)}, {"status", "error"},
                       {"error_type", "numerical"}, {"message", e.what()}};
    err << "numerical failure: " << e.what() << "\n";
    if (!c.out.empty()) {
      std::ofstream f(c.out, std::ios::binary);
      f << dump(diag);
    } else {
      out << dump(diag);
    }
    return 1;
  } catch (const std::exception& e) {
    // ParameterError, DomainError, UnsupportedFunctional and ArgumentError are all bad input
    err << "error: " << e.what() << "\nrun 'bogo " << active->get_name() << " --help' for usage\n";
    return 2;
  }

  if (!c.out.empty()) {
    std::ofstream f(c.out, std::ios::binary);
    if (!f) {
      err << "error: cannot write '" << c.out << "'\n";
      return 1;
    }
    f << res.text;
  } else {
    out << res.text;
  }
  return res.ok ? 0 : 1;
}

}  // namespace bogo::cli
