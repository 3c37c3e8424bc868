#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lowrank/operators.hpp"
#include "lowrank/penalty.hpp"

namespace lowrank {

/// Support of the true spectrum split at the flatness threshold nu:
/// s1 holds gamma_i >= nu, s2 holds 0 < gamma_i < nu. Zeros are in neither.
struct SpectralSplit {
  std::vector<Index> s;
  std::vector<Index> s1;
  std::vector<Index> s2;

  Index r() const { return static_cast<Index>(s.size()); }
  Index r1() const { return static_cast<Index>(s1.size()); }
  Index r2() const { return static_cast<Index>(s2.size()); }
};

// nu may be +infinity (nuclear norm: everything lands in s2).
SpectralSplit split_spectrum(const VectorXd& gamma_star, double nu);

struct ErrorBoundReport {
  double tau = 0.0;
  double lambda = 0.0;
  double kappa = 0.0;
  double zeta_minus = 0.0;
  Index r1 = 0;
  Index r2 = 0;
  double part_s1 = 0.0;  // tau sqrt(r1) / (kappa - zeta)
  double part_s2 = 0.0;  // 3 lambda sqrt(r2) / (kappa - zeta)
  double total = 0.0;
};

/// Two-part Frobenius error bound. Throws ConditionViolation unless
/// kappa > zeta_minus >= 0.
ErrorBoundReport error_bound_general(double tau, double lambda, double kappa, double zeta_minus,
                                     Index r1, Index r2);

// 2 sqrt(r) tau / kappa; throws DomainError unless kappa > 0.
double oracle_bound(double tau, Index r, double kappa);

/// min_{i in S} gamma_i - (nu + 2 sqrt(r) ||X*(eps)||_2 / (n kappa)).
/// Positive means the minimal-signal condition for the oracle property holds.
double oracle_condition_gap(const VectorXd& gamma_star, double nu, Index r,
                            double adj_noise_spectral, Index n, double kappa);

// c sigma sqrt(M ln M / (m1 m2 n)), M = max(m1, m2).
double lambda_completion(double sigma, Index m1, Index m2, Index n, double c);
// c sigma pi (sqrt(m1/n) + sqrt(m2/n)).
double lambda_sensing(double sigma, double pi_sigma, Index m1, Index m2, Index n, double c);
// 2 a + 2 sqrt(r) rho a / kappa with a an estimate of ||X*(eps)||_2 / n.
double lambda_oracle(double adj_noise_over_n, Index r, double rho, double kappa);

/// pi(Sigma) = sqrt(sup_{|u|=|v|=1} Var(u^T X v)) for the ensemble. Exactly 1
/// for the identity; otherwise maximized by alternating top-eigenvector updates.
double ensemble_pi(const SensingEnsemble& ensemble, Index m1, Index m2);

struct ConeCheck {
  double ratio = 0.0;  // ||Pi_perp(D)||_* / ||Pi_F(D)||_*
  bool in_cone = false;
};

// Membership in {D : ||Pi_perp(D)||_* <= 5 ||Pi_F(D)||_*}.
ConeCheck cone_condition(const MatrixXd& delta, const Subspace& sub);

struct CurvatureEstimate {
  double kappa_hat = 0.0;
  // Largest sampled curvature; a lower bound on the true smoothness constant.
  double rho_hat = 0.0;
  int samples = 0;
  std::string min_witness;
};

/// Empirical restricted curvature: ||X(D)||^2 / n over random unit-Frobenius
/// cone directions D = Pi_F(G) + s Pi_perp(G'), with the nuclear-norm ratio of
/// the two parts drawn uniformly in [0, 5].
CurvatureEstimate probe_rsc(const Design& design, const Subspace& sub, int trials, Rng& rng);

// ||Pi_{F_S1}(grad L(theta_star))||_2.
double tau_value(const ObservationSet& obs, const MatrixXd& theta_star, const Subspace& sub_s1);

// max_i |gamma_i(A) - gamma_i(B)| - ||A - B||_2; never positive up to rounding.
double weyl_gap(const MatrixXd& A, const MatrixXd& B);

}  // namespace lowrank
