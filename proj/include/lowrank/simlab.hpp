#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lowrank/operators.hpp"
#include "lowrank/penalty.hpp"
#include "lowrank/solver.hpp"
#include "lowrank/theory.hpp"

namespace lowrank {

enum class ObservationModel { Completion, Sensing };

std::string_view to_string(ObservationModel model);

enum class SpectrumRuleKind { AllAboveNu, Mixed, Uniform };

/// How the nonzero singular values of the ground truth are chosen.
///  - AllAboveNu: r values uniform in [nu (1 + margin), 2 nu (1 + margin)].
///  - Mixed: r1 values as above, r2 values at low_fraction * nu (< nu).
///  - Uniform: r values uniform in [low, high], independent of nu.
struct SpectrumRule {
  SpectrumRuleKind kind = SpectrumRuleKind::AllAboveNu;
  double margin = 0.2;
  Index r1 = 0;
  Index r2 = 0;
  double low_fraction = 0.5;
  double low = 1.0;
  double high = 2.0;

  static SpectrumRule all_above_nu(double margin = 0.2) {
    SpectrumRule s;
    s.margin = margin;
    return s;
  }
  static SpectrumRule mixed(Index r1, Index r2, double low_fraction, double margin = 0.2) {
    SpectrumRule s;
    s.kind = SpectrumRuleKind::Mixed;
    s.r1 = r1;
    s.r2 = r2;
    s.low_fraction = low_fraction;
    s.margin = margin;
    return s;
  }
  static SpectrumRule uniform(double low, double high) {
    SpectrumRule s;
    s.kind = SpectrumRuleKind::Uniform;
    s.low = low;
    s.high = high;
    return s;
  }
};

/// Penalty without lambda; lambda is resolved per trial. An absent b on a
/// nonconvex family means "auto": b is set from the population curvature
/// kappa of the design so that zeta_minus = kappa / 2 (SCAD: b = 1 + 2/kappa,
/// MCP: b = 2/kappa).
struct PenaltyTemplate {
  PenaltyFamily family = PenaltyFamily::Scad;
  std::optional<double> b;

  std::string label() const;
};

enum class LambdaRule {
  // completion: c sigma sqrt(M ln M/(m1 m2 n)); sensing: c sigma pi (sqrt(m1/n)+sqrt(m2/n))
  Theory,
  // 2a + 2 sqrt(r) rho a / kappa, a = the theory rule at c = 1, (kappa, rho) from probe_rsc
  Oracle,
};

struct TrialSpec {
  ObservationModel model = ObservationModel::Completion;
  Index m1 = 0;
  Index m2 = 0;
  Index r = 0;
  SpectrumRule spectrum;
  double sigma = 0.0;
  // Exactly one of the two grids is non-empty.
  std::vector<Index> n_grid;
  std::vector<double> rescaled_grid;
  std::vector<PenaltyTemplate> penalties;
  LambdaRule lambda_rule = LambdaRule::Theory;
  double c = 2.0;
  int repeats = 1;
  std::uint64_t base_seed = 0;
  SolverConfig solver;
  SensingEnsemble ensemble = SensingEnsemble::identity();
  // Curvature probe, error bound and cone check per trial.
  bool diagnostics = true;
  int probe_trials = 100;
  double oracle_match_tol = 1e-3;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Raw sample sizes, converting rescaled values when needed.
  std::vector<Index> resolved_n() const;
};

struct TrialOutcome {
  ObservationModel model = ObservationModel::Completion;
  Index m1 = 0;
  Index m2 = 0;
  Index r = 0;
  Index n = 0;
  double rescaled_n = 0.0;
  std::size_t penalty_index = 0;
  std::string penalty;
  double lambda = 0.0;
  double b = 0.0;
  int repeat = 0;
  std::uint64_t seed = 0;

  double mse = 0.0;  // frob_err^2 / (m1 m2)
  double frob_err = 0.0;
  double rel_err = 0.0;
  int rank_hat = 0;
  bool rank_correct = false;
  bool converged = false;
  int iterations = 0;
  double fixed_point_residual = 0.0;
  double runtime_seconds = 0.0;
  std::string failure;  // non-empty when the solver diverged

  std::optional<bool> oracle_match;
  std::optional<double> oracle_rel_diff;
  std::optional<CurvatureEstimate> curvature;
  std::optional<ErrorBoundReport> bound;
  std::optional<ConeCheck> cone;
  std::optional<bool> bound_holds;
  std::optional<double> oracle_gap;
};

struct CellSummary {
  Index n = 0;
  double rescaled_n = 0.0;
  std::size_t penalty_index = 0;
  std::string penalty;
  int count = 0;
  int converged = 0;
  double mean_lambda = 0.0;
  double mean_mse = 0.0;
  double std_mse = 0.0;
  double mean_frob_err = 0.0;
  double rank_recovery_rate = 0.0;
};

struct GridResult {
  std::vector<TrialOutcome> trials;  // ordered by (n, penalty, repeat)
  std::vector<CellSummary> cells;    // ordered by (n, penalty)
};

struct GroundTruth {
  MatrixXd theta_star;
  Subspace subspace;
  VectorXd gamma_star;  // nonincreasing
};

// First r left/right singular vectors of an m1 x m2 Gaussian matrix.
Subspace sample_singular_frames(Rng& rng, Index m1, Index m2, Index r);
GroundTruth assemble_ground_truth(const Subspace& frames, const VectorXd& gamma_values);
GroundTruth generate_ground_truth(Rng& rng, Index m1, Index m2, Index r,
                                  const VectorXd& gamma_values);

// completion: n / (r m ln m); sensing: n / (r m)
double rescale_n(ObservationModel model, double n, Index r, Index m);
Index n_from_rescaled(ObservationModel model, double rescaled, Index r, Index m);

TrialOutcome run_trial(const TrialSpec& spec, Index n, std::size_t penalty_index, int repeat);

/// Every (n, penalty, repeat) trial, run on up to `jobs` threads. Results and
/// cell aggregates do not depend on the thread count.
GridResult run_grid(const TrialSpec& spec, int jobs = 1);

// Uniform partition without replacement: floor(train_fraction * size) go to train.
std::pair<std::vector<Triplet>, std::vector<Triplet>> holdout_split(
    const std::vector<Triplet>& triplets, double train_fraction, Rng& rng);
double rmse(const MatrixXd& predicted, const std::vector<Triplet>& test);

}  // namespace lowrank
