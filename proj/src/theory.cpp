#include "lowrank/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lowrank/errors.hpp"
#include "lowrank/solver.hpp"

namespace lowrank {

namespace {

constexpr double kConeRatio = 5.0;
constexpr int kPiAlternations = 100;

}  // namespace

SpectralSplit split_spectrum(const VectorXd& gamma_star, double nu) {
  if (!(nu > 0.0)) throw DomainError("split_spectrum requires nu > 0");
  SpectralSplit split;
  for (Index i = 0; i < gamma_star.size(); ++i) {
    const double g = gamma_star(i);
    if (g < 0.0) throw DomainError("split_spectrum: negative singular value");
    if (g == 0.0) continue;
    split.s.push_back(i);
    (g >= nu ? split.s1 : split.s2).push_back(i);
  }
  return split;
}

ErrorBoundReport error_bound_general(double tau, double lambda, double kappa, double zeta_minus,
                                     Index r1, Index r2) {
  if (!(zeta_minus >= 0.0)) throw DomainError("zeta_minus must be nonnegative");
  if (!(kappa > zeta_minus)) {
    std::ostringstream os;
    os << "error bound requires kappa > zeta_minus (kappa=" << kappa << ", zeta_minus=" << zeta_minus
       << ")";
    throw ConditionViolation(os.str());
  }
  ErrorBoundReport rep;
  rep.tau = tau;
  rep.lambda = lambda;
  rep.kappa = kappa;
  rep.zeta_minus = zeta_minus;
  rep.r1 = r1;
  rep.r2 = r2;
  const double gap = kappa - zeta_minus;
  rep.part_s1 = tau * std::sqrt(static_cast<double>(r1)) / gap;
  rep.part_s2 = 3.0 * lambda * std::sqrt(static_cast<double>(r2)) / gap;
  rep.total = rep.part_s1 + rep.part_s2;
  return rep;
}

double oracle_bound(double tau, Index r, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("oracle_bound requires kappa > 0");
  return 2.0 * std::sqrt(static_cast<double>(r)) * tau / kappa;
}

double oracle_condition_gap(const VectorXd& gamma_star, double nu, Index r,
                            double adj_noise_spectral, Index n, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("oracle_condition_gap requires kappa > 0");
  if (n < 1) throw DomainError("oracle_condition_gap requires n >= 1");
  double smallest = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < gamma_star.size(); ++i) {
    if (gamma_star(i) > 0.0) smallest = std::min(smallest, gamma_star(i));
  }
  if (!std::isfinite(smallest)) throw DomainError("oracle_condition_gap: empty support");
  const double required = nu + 2.0 * std::sqrt(static_cast<double>(r)) * adj_noise_spectral /
                                   (static_cast<double>(n) * kappa);
  return smallest - required;
}

double lambda_completion(double sigma, Index m1, Index m2, Index n, double c) {
  const double big_m = static_cast<double>(std::max(m1, m2));
  return c * sigma *
         std::sqrt(big_m * std::log(big_m) /
                   (static_cast<double>(m1) * static_cast<double>(m2) * static_cast<double>(n)));
}

double lambda_sensing(double sigma, double pi_sigma, Index m1, Index m2, Index n, double c) {
  const double nn = static_cast<double>(n);
  return c * sigma * pi_sigma *
         (std::sqrt(static_cast<double>(m1) / nn) + std::sqrt(static_cast<double>(m2) / nn));
}

double lambda_oracle(double adj_noise_over_n, Index r, double rho, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("lambda_oracle requires kappa > 0");
  return 2.0 * adj_noise_over_n +
         2.0 * std::sqrt(static_cast<double>(r)) * rho * adj_noise_over_n / kappa;
}

double ensemble_pi(const SensingEnsemble& ensemble, Index m1, Index m2) {
  if (ensemble.kind() == EnsembleKind::Identity) return 1.0;
  const MatrixXd& L = ensemble.factor();
  if (L.rows() != m1 * m2) throw DimensionError("ensemble_pi: factor does not match m1*m2");
  const MatrixXd sigma = L * L.transpose();
  // Var(u^T X v) = (v kron u)^T Sigma (v kron u) for column-major vec.
  VectorXd u = VectorXd::Constant(m1, 1.0 / std::sqrt(static_cast<double>(m1)));
  VectorXd v = VectorXd::Constant(m2, 1.0 / std::sqrt(static_cast<double>(m2)));
  double value = 0.0;
  for (int it = 0; it < kPiAlternations; ++it) {
    MatrixXd Mu = MatrixXd::Zero(m1, m1);
    for (Index b = 0; b < m2; ++b)
      for (Index d = 0; d < m2; ++d)
        Mu += v(b) * v(d) * sigma.block(b * m1, d * m1, m1, m1);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eu(Mu);
    u = eu.eigenvectors().col(m1 - 1);
    MatrixXd Mv(m2, m2);
    for (Index b = 0; b < m2; ++b)
      for (Index d = 0; d < m2; ++d)
        Mv(b, d) = u.dot(sigma.block(b * m1, d * m1, m1, m1) * u);
    Eigen::SelfAdjointEigenSolver<MatrixXd> ev(Mv);
    v = ev.eigenvectors().col(m2 - 1);
    const double next = ev.eigenvalues()(m2 - 1);
    if (std::abs(next - value) <= 1e-14 * std::abs(next)) {
      value = next;
      break;
    }
    value = next;
  }
  return std::sqrt(value);
}

ConeCheck cone_condition(const MatrixXd& delta, const Subspace& sub) {
  const double inside = nuclear_norm(project_onto(sub, delta));
  const double outside = nuclear_norm(project_complement(sub, delta));
  ConeCheck out;
  out.ratio = outside / std::max(inside, 1e-300);
  out.in_cone = outside <= kConeRatio * inside;
  return out;
}

CurvatureEstimate probe_rsc(const Design& design, const Subspace& sub, int trials, Rng& rng) {
  if (trials < 1) throw DomainError("probe_rsc requires trials >= 1");
  const Index m1 = design_rows(design);
  const Index m2 = design_cols(design);
  const double n = static_cast<double>(design_size(design));
  std::uniform_real_distribution<double> ratio_dist(0.0, kConeRatio);

  CurvatureEstimate est;
  est.kappa_hat = std::numeric_limits<double>::infinity();
  est.rho_hat = 0.0;
  int argmin = -1;
  double argmin_ratio = 0.0;
  for (int t = 0; t < trials; ++t) {
    const MatrixXd inside = project_onto(sub, gaussian_matrix(rng, m1, m2));
    const MatrixXd outside = project_complement(sub, gaussian_matrix(rng, m1, m2));
    const double target = ratio_dist(rng);
    const double in_nuc = nuclear_norm(inside);
    const double out_nuc = nuclear_norm(outside);
    MatrixXd delta = inside;
    double realized = 0.0;
    if (out_nuc > 0.0 && in_nuc > 0.0) {
      delta += (target * in_nuc / out_nuc) * outside;
      realized = target;
    }
    const double fro = delta.norm();
    if (!(fro > 0.0)) continue;
    delta /= fro;
    const double curvature = apply_forward(design, delta).squaredNorm() / n;
    if (curvature < est.kappa_hat) {
      est.kappa_hat = curvature;
      argmin = t;
      argmin_ratio = realized;
    }
    est.rho_hat = std::max(est.rho_hat, curvature);
    ++est.samples;
  }
  if (est.samples == 0) {
    est.kappa_hat = 0.0;
    est.min_witness = "no admissible direction (trivial subspace)";
    return est;
  }
  std::ostringstream os;
  os << "sample " << argmin << ", complement/F nuclear ratio " << argmin_ratio;
  est.min_witness = os.str();
  return est;
}

double tau_value(const ObservationSet& obs, const MatrixXd& theta_star, const Subspace& sub_s1) {
  if (sub_s1.rank() == 0) return 0.0;
  return spectral_norm(project_onto(sub_s1, loss_gradient(obs, theta_star)));
}

double weyl_gap(const MatrixXd& A, const MatrixXd& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols()) {
    throw DimensionError("weyl_gap: shape mismatch");
  }
  const VectorXd sa = singular_values(A);
  const VectorXd sb = singular_values(B);
  const double lhs = sa.size() == 0 ? 0.0 : (sa - sb).cwiseAbs().maxCoeff();
  return lhs - spectral_norm(A - B);
}

}  // namespace lowrank
