#include "lowrank/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lowrank/errors.hpp"

namespace lowrank {

namespace {

constexpr int kMinPowerSteps = 50;
constexpr int kMaxPowerSteps = 1000;
constexpr double kLipschitzInflation = 1.05;
constexpr Index kDirectOracleLimit = 400;
constexpr double kOracleCgTol = 1e-10;
constexpr double kOracleJitter = 1e-12;

MatrixXd gram_apply(const Design& design, const MatrixXd& theta) {
  return apply_adjoint(design, apply_forward(design, theta)) /
         static_cast<double>(design_size(design));
}

// Rows of the r^2-column system: entry (i, a + r*b) = <X_i, u_a v_b^T>.
MatrixXd oracle_system(const Design& design, const Subspace& sub) {
  const Index r = sub.rank();
  const MatrixXd& U = sub.U();
  const MatrixXd& V = sub.V();
  const Index n = design_size(design);
  MatrixXd B(n, r * r);
  if (const auto* c = std::get_if<CompletionDesign>(&design)) {
    const auto& entries = c->entries();
    for (Index i = 0; i < n; ++i) {
      const auto& e = entries[static_cast<std::size_t>(i)];
      for (Index b = 0; b < r; ++b)
        for (Index a = 0; a < r; ++a) B(i, a + r * b) = U(e.row, a) * V(e.col, b);
    }
  } else {
    const auto& s = std::get<SensingDesign>(design);
    for (Index i = 0; i < n; ++i) {
      const MatrixXd X = s.observation_matrix(i);
      const MatrixXd core = U.transpose() * X * V;
      B.row(i) = Eigen::Map<const VectorXd>(core.data(), r * r).transpose();
    }
  }
  return B;
}

// Plain CG on (B^T B + ridge I) x = rhs. Returns false when the relative
// residual target is not reached.
bool conjugate_gradient(const MatrixXd& B, const VectorXd& rhs, double ridge, VectorXd& x) {
  const Index dim = B.cols();
  x = VectorXd::Zero(dim);
  VectorXd r = rhs;
  VectorXd p = r;
  double rs = r.squaredNorm();
  const double target = kOracleCgTol * rhs.norm();
  if (std::sqrt(rs) <= target) return true;
  const int max_steps = static_cast<int>(4 * dim);
  for (int k = 0; k < max_steps; ++k) {
    const VectorXd Ap = B.transpose() * (B * p) + ridge * p;
    const double denom = p.dot(Ap);
    if (!(denom > 0.0)) return false;
    const double alpha = rs / denom;
    x += alpha * p;
    r -= alpha * Ap;
    const double rs_new = r.squaredNorm();
    if (std::sqrt(rs_new) <= target) return true;
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  return false;
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iter < 1) throw DomainError("solver max_iter must be >= 1");
  if (!(tol > 0.0)) throw DomainError("solver tol must be > 0");
  if (step.kind == StepKind::Fixed && !(step.eta > 0.0)) {
    throw DomainError("fixed step size eta must be > 0");
  }
  if (!(rank_tol_rel > 0.0)) throw DomainError("rank_tol_rel must be > 0");
  if (alpha_star && !(*alpha_star > 0.0)) throw DomainError("alpha_star must be > 0");
}

double estimate_lipschitz(const Design& design) {
  const Index m1 = design_rows(design);
  const Index m2 = design_cols(design);
  // Deterministic start with a nonzero component along every cell.
  MatrixXd x(m1, m2);
  for (Index j = 0; j < m2; ++j)
    for (Index i = 0; i < m1; ++i)
      x(i, j) = 1.0 + 0.25 * std::sin(0.7 * static_cast<double>(i) + 1.3 * static_cast<double>(j));
  x.normalize();

  double value = 0.0;
  for (int step = 0; step < kMaxPowerSteps; ++step) {
    const MatrixXd y = gram_apply(design, x);
    const double next = (x.array() * y.array()).sum();
    const double norm = y.norm();
    if (!(norm > 0.0)) return 0.0;
    x = y / norm;
    const bool settled = std::abs(next - value) <= 1e-12 * std::abs(next);
    value = next;
    if (step + 1 >= kMinPowerSteps && settled) break;
  }
  return kLipschitzInflation * value;
}

VectorXd singular_values(const MatrixXd& A) {
  if (A.size() == 0) return VectorXd();
  Eigen::BDCSVD<MatrixXd> svd(A);
  return svd.singularValues();
}

double spectral_norm(const MatrixXd& A) {
  const VectorXd s = singular_values(A);
  return s.size() == 0 ? 0.0 : s(0);
}

double nuclear_norm(const MatrixXd& A) { return singular_values(A).sum(); }

namespace {

struct ProxOutput {
  MatrixXd theta;
  VectorXd input_spectrum;
  VectorXd output_spectrum;
};

ProxOutput prox_spectral_detailed(const PenaltySpec& spec, const MatrixXd& Z, double eta) {
  if (!(eta > 0.0)) throw DomainError("prox_spectral requires eta > 0");
  Eigen::BDCSVD<MatrixXd> svd(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("SVD failed in prox_spectral");
  ProxOutput out;
  out.input_spectrum = svd.singularValues();
  out.output_spectrum.resize(out.input_spectrum.size());
  Index keep = 0;
  for (Index i = 0; i < out.input_spectrum.size(); ++i) {
    out.output_spectrum(i) = scalar_prox(spec, out.input_spectrum(i), eta);
    if (out.output_spectrum(i) > 0.0) keep = i + 1;
  }
  out.theta = svd.matrixU().leftCols(keep) * out.output_spectrum.head(keep).asDiagonal() *
              svd.matrixV().leftCols(keep).transpose();
  return out;
}

double penalty_sum(const PenaltySpec& spec, const VectorXd& spectrum) {
  double total = 0.0;
  for (Index i = 0; i < spectrum.size(); ++i) total += penalty_value(spec, spectrum(i));
  return total;
}

}  // namespace

MatrixXd prox_spectral(const PenaltySpec& spec, const MatrixXd& Z, double eta) {
  return prox_spectral_detailed(spec, Z, eta).theta;
}

double objective_value(const ObservationSet& obs, const PenaltySpec& spec, const MatrixXd& theta) {
  return loss_value(obs, theta) + penalty_sum(spec, singular_values(theta));
}

FitResult fit(const ObservationSet& obs, const PenaltySpec& spec, const SolverConfig& config,
              const IterationObserver& observer) {
  config.validate();
  const Index m1 = design_rows(obs.design);
  const Index m2 = design_cols(obs.design);

  FitResult result;
  const double eta = config.step.kind == StepKind::Fixed ? config.step.eta
                                                           : 1.0 / estimate_lipschitz(obs.design);
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw DivergenceError(0, "step size is not finite (degenerate design)");
  }
  result.step_size = eta;

  MatrixXd theta = MatrixXd::Zero(m1, m2);
  if (config.warm_start == WarmStart::NuclearSolution) {
    SolverConfig inner = config;
    inner.warm_start = WarmStart::Zero;
    theta = fit(obs, PenaltySpec::nuclear(spec.lambda()), inner).theta_hat;
  }

  result.objective_trace.push_back(objective_value(obs, spec, theta));
  int it = 0;
  for (it = 1; it <= config.max_iter; ++it) {
    const MatrixXd grad = loss_gradient(obs, theta);
    ProxOutput step = prox_spectral_detailed(spec, theta - eta * grad, eta);
    double objective = 0.0;
    if (config.alpha_star) {
      step.theta = step.theta.cwiseMax(-*config.alpha_star).cwiseMin(*config.alpha_star);
      objective = objective_value(obs, spec, step.theta);
    } else {
      objective = loss_value(obs, step.theta) + penalty_sum(spec, step.output_spectrum);
    }
    if (!std::isfinite(objective)) {
      throw DivergenceError(it, "objective became non-finite at iteration " + std::to_string(it));
    }
    if (observer) observer({it, step.input_spectrum, step.output_spectrum, objective});
    result.objective_trace.push_back(objective);

    const double change = (step.theta - theta).norm() / std::max(1.0, theta.norm());
    theta = std::move(step.theta);
    if (change <= config.tol) {
      result.converged = true;
      break;
    }
  }
  result.iterations = std::min(it, config.max_iter);

  const MatrixXd again = prox_spectral(spec, theta - eta * loss_gradient(obs, theta), eta);
  result.fixed_point_residual = (theta - again).norm();
  result.spectrum = singular_values(theta);
  result.rank_hat = numeric_rank(result.spectrum, config.rank_tol_rel);
  result.theta_hat = std::move(theta);
  return result;
}

OracleResult solve_oracle(const ObservationSet& obs, const Subspace& sub) {
  const Index m1 = design_rows(obs.design);
  const Index m2 = design_cols(obs.design);
  if (sub.U().rows() != m1 || sub.V().rows() != m2) {
    throw DimensionError("solve_oracle: subspace does not match the design shape");
  }
  const Index r = sub.rank();
  if (r > std::min(m1, m2)) throw DimensionError("solve_oracle: rank exceeds min(m1, m2)");

  OracleResult out;
  if (r == 0) {
    out.theta = MatrixXd::Zero(m1, m2);
    out.coefficients = MatrixXd::Zero(0, 0);
    return out;
  }

  const MatrixXd B = oracle_system(obs.design, sub);
  const Index dim = r * r;
  VectorXd c;
  if (dim <= kDirectOracleLimit) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(B);
    c = cod.solve(obs.y);
    out.null_dimension = static_cast<int>(dim - cod.rank());
  } else {
    const VectorXd rhs = B.transpose() * obs.y;
    if (!conjugate_gradient(B, rhs, 0.0, c)) {
      const double trace = B.colwise().squaredNorm().sum();
      if (!conjugate_gradient(B, rhs, kOracleJitter * trace, c)) {
        const MatrixXd normal = B.transpose() * B;
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
        const double top = eig.eigenvalues().maxCoeff();
        const int nulls = static_cast<int>(
            (eig.eigenvalues().array() <= kOracleJitter * std::max(top, 1e-300)).count());
        throw RankDeficiencyError(nulls, "oracle normal equations are singular (null dimension " +
                                             std::to_string(nulls) + ")");
      }
      out.null_dimension = 0;
    }
  }
  out.rank_deficient = out.null_dimension > 0;
  out.coefficients = Eigen::Map<const MatrixXd>(c.data(), r, r);
  out.theta = sub.U() * out.coefficients * sub.V().transpose();
  return out;
}

int numeric_rank(const VectorXd& spectrum, double rel_tol) {
  if (spectrum.size() == 0) return 0;
  if ((spectrum.array() < 0.0).any()) throw DomainError("numeric_rank: negative singular value");
  const double top = spectrum.maxCoeff();
  if (!(top > 0.0)) return 0;
  return static_cast<int>((spectrum.array() > rel_tol * top).count());
}

}  // namespace lowrank
