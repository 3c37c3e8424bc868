#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lowrank/operators.hpp"
#include "lowrank/penalty.hpp"

namespace lowrank {

enum class StepKind { Fixed, InversePower };
enum class WarmStart { Zero, NuclearSolution };

struct StepPolicy {
  StepKind kind = StepKind::InversePower;
  double eta = 0.0;  // used when kind == Fixed

  static StepPolicy fixed(double eta) { return {StepKind::Fixed, eta}; }
  static StepPolicy inverse_power() { return {StepKind::InversePower, 0.0}; }
};

struct SolverConfig {
  int max_iter = 2000;
  // Stop when ||theta+ - theta||_F / max(1, ||theta||_F) <= tol.
  double tol = 1e-7;
  StepPolicy step = StepPolicy::inverse_power();
  // Optional box ||theta||_inf <= alpha_star, applied by clipping after the prox.
  std::optional<double> alpha_star;
  WarmStart warm_start = WarmStart::Zero;
  double rank_tol_rel = 1e-4;

  // Throws DomainError on tol <= 0, max_iter < 1, non-positive fixed eta,
  // rank_tol_rel <= 0 or alpha_star <= 0.
  void validate() const;
};

struct FitResult {
  MatrixXd theta_hat;
  VectorXd spectrum;  // nonincreasing singular values of theta_hat
  int rank_hat = 0;
  int iterations = 0;
  std::vector<double> objective_trace;
  double fixed_point_residual = 0.0;
  bool converged = false;
  double step_size = 0.0;
};

// Seen once per iteration, before the (optional) box clip.
struct IterationEvent {
  int iteration;
  const VectorXd& prox_input_spectrum;
  const VectorXd& prox_output_spectrum;
  double objective;
};
using IterationObserver = std::function<void(const IterationEvent&)>;

/// Upper estimate of the largest eigenvalue of theta -> X*(X(theta))/n:
/// power iteration (at least 50 steps) followed by a 1.05 inflation.
double estimate_lipschitz(const Design& design);

// Nonincreasing singular values.
VectorXd singular_values(const MatrixXd& A);
double spectral_norm(const MatrixXd& A);
double nuclear_norm(const MatrixXd& A);

/// Applies scalar_prox to every singular value of Z.
MatrixXd prox_spectral(const PenaltySpec& spec, const MatrixXd& Z, double eta);

/// Loss plus the spectral penalty.
double objective_value(const ObservationSet& obs, const PenaltySpec& spec, const MatrixXd& theta);

/// Proximal gradient for (2n)^-1 ||y - X(theta)||^2 + sum_i p(gamma_i(theta)).
///
/// Throws DivergenceError when the objective stops being finite. Hitting
/// max_iter is not an error: the result comes back with converged = false.
FitResult fit(const ObservationSet& obs, const PenaltySpec& spec, const SolverConfig& config,
              const IterationObserver& observer = {});

struct OracleResult {
  MatrixXd theta;         // U C V^T
  MatrixXd coefficients;  // C, r x r
  int null_dimension = 0;
  bool rank_deficient = false;
};

/// Least squares restricted to F(U, V): minimizes ||y - X(U C V^T)||^2 over C.
///
/// For r^2 <= 400 the r^2-column system is solved directly with a complete
/// orthogonal decomposition, which yields the minimum-norm C when the system is
/// underdetermined (flagged through rank_deficient). Larger systems use
/// conjugate gradients on the normal equations to relative residual 1e-10, with
/// a 1e-12 * trace ridge retried on failure; RankDeficiencyError is thrown when
/// that still does not converge.
OracleResult solve_oracle(const ObservationSet& obs, const Subspace& sub);

// Count of entries strictly above rel_tol * spectrum(0).
int numeric_rank(const VectorXd& spectrum, double rel_tol);

}  // namespace lowrank
