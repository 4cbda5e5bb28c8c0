#pragma once

#include <json.hpp>

#include "equilibrium.hpp"
#include "params.hpp"
#include "sampler.hpp"
#include "trajectories.hpp"

namespace bogo {

inline void to_json(nlohmann::json& j, const MeasureParams& p) { j = {{"m", p.m}, {"omega", p.omega}, {"beta", p.beta}}; }

namespace sampler {
inline void to_json(nlohmann::json& j, const EstimateReport& r) {
  j = {{"estimate", r.estimate}, {"std_error", r.std_error},   {"n_samples", r.n_samples},
       {"n_nonfinite", r.n_nonfinite}, {"seed", r.seed}, {"method", to_string(r.method)}};
}
}  // namespace sampler

namespace trajectories {
inline void to_json(nlohmann::json& j, const QVarReport& r) {
  j = {{"N", r.N},
       {"n_paths", r.n_paths},
       {"sample_mean", r.sample_mean},
       {"sample_mean_se", r.sample_mean_se},
       {"sample_var", r.sample_var},
       {"sample_I_N", r.sample_I_N},
       {"sample_I_N_se", r.sample_I_N_se},
       {"exact_mean", r.exact_mean},
       {"exact_var", r.exact_var},
       {"exact_I_N", r.exact_I_N}};
}
}  // namespace trajectories

namespace equilibrium {
inline void to_json(nlohmann::json& j, const DominationReport& r) {
  j = {{"h_values", r.h_values},       {"R0", r.R0},
       {"R_estimates", r.R_estimates}, {"R_shifted", r.R_shifted},
       {"paired_diff", r.paired_diff}, {"bound_ok", r.bound_ok},
       {"z_scores", r.z_scores},       {"monotone_in_h", r.monotone_in_h},
       {"all_ok", r.all_ok()}};
}

inline void to_json(nlohmann::json& j, const FalkBruchInputs& f) {
  j = {{"b0", f.b0}, {"c0", f.c0}, {"g0", f.g0}, {"free_value", f.free_value}, {"identity_error", f.identity_error}};
}
}  // namespace equilibrium

}  // namespace bogo
