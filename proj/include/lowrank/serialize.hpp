#pragma once

#include <optional>
#include <string>

#include "json.hpp"
#include "lowrank/penalty.hpp"
#include "lowrank/simlab.hpp"
#include "lowrank/solver.hpp"
#include "lowrank/theory.hpp"

namespace lowrank {

using Json = nlohmann::json;

// {"family", "lambda", "b"}
Json to_json(const PenaltySpec& spec);
PenaltySpec penalty_from_json(const Json& j);

// {rank_hat, iterations, converged, fixed_point_residual, step_size, spectrum}
Json to_json(const FitResult& fit);
Json to_json(const ErrorBoundReport& report);
Json to_json(const CurvatureEstimate& est);
Json to_json(const RegularityReport& report);
Json to_json(const TrialOutcome& outcome);
Json to_json(const SolverConfig& config);
// Echo of the resolved spec. A Cholesky ensemble is summarized by its dimension.
Json to_json(const TrialSpec& spec);

/// Experiment document: the TrialSpec fields plus run options.
struct RunConfig {
  TrialSpec spec;
  std::optional<std::string> out_dir;
  std::optional<int> jobs;
  bool record_runtime = false;
};

/// Strict reader. Unknown or mistyped keys throw ConfigError naming the key
/// (dotted for nested objects, e.g. "solver.tol"); the spec is validated.
///
///   {"model": "completion"|"sensing", "m1", "m2", "r", "sigma",
///    "n_grid": [..] | "N_grid": [..],
///    "penalties": [{"family": "scad", "b": 3.7 | "auto"}, ...],
///    "spectrum": {"rule": "all_above_nu", "margin"}
///              | {"rule": "mixed", "r1", "r2", "low_fraction", "margin"}
///              | {"rule": "uniform", "low", "high"},
///    "lambda_rule": "theory"|"oracle", "c", "repeats", "base_seed",
///    "solver": {"max_iter", "tol", "step": "inverse_power" | {"fixed": eta},
///               "alpha_star", "warm_start": "zero"|"nuclear", "rank_tol_rel"},
///    "ensemble": {"kind": "identity"} | {"kind": "ar1", "rho"}
///              | {"kind": "cholesky", "factor": [[..], ..]},
///    "diagnostics", "probe_trials", "oracle_match_tol",
///    "out_dir", "jobs", "record_runtime"}
RunConfig run_config_from_json(const Json& j);
TrialSpec trial_spec_from_json(const Json& j);
SolverConfig solver_config_from_json(const Json& j, const std::string& prefix = "solver");

// Sigma_{ij} = rho^|i-j| over vec order, as a Cholesky ensemble.
SensingEnsemble ar1_ensemble(Index dimension, double rho);

}  // namespace lowrank
