#include "lowrank/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "lowrank/errors.hpp"

namespace lowrank {

namespace {

constexpr double kSigmaFloor = 0.01;

// Substream tags under a trial seed.
enum Stream : std::uint64_t { kFrames = 1, kDesign = 2, kNoise = 3, kSpectrum = 4, kProbe = 5 };

double population_kappa(const TrialSpec& spec) {
  if (spec.model == ObservationModel::Completion) {
    return 1.0 / (static_cast<double>(spec.m1) * static_cast<double>(spec.m2));
  }
  if (spec.ensemble.kind() == EnsembleKind::Identity) return 1.0;
  const VectorXd s = singular_values(spec.ensemble.factor());
  const double smallest = s(s.size() - 1);
  return smallest * smallest;
}

double resolve_b(const PenaltyTemplate& t, const TrialSpec& spec) {
  if (t.b) return *t.b;
  const double kappa = population_kappa(spec);
  switch (t.family) {
    case PenaltyFamily::Nuclear: return 0.0;
    case PenaltyFamily::Scad: return 1.0 + 2.0 / kappa;
    case PenaltyFamily::Mcp: return 2.0 / kappa;
  }
  return 0.0;
}

bool spectrum_needs_nu(const SpectrumRule& rule) { return rule.kind != SpectrumRuleKind::Uniform; }

std::optional<std::size_t> reference_penalty(const TrialSpec& spec) {
  for (std::size_t i = 0; i < spec.penalties.size(); ++i) {
    if (spec.penalties[i].family != PenaltyFamily::Nuclear) return i;
  }
  return std::nullopt;
}

double noise_scale(const TrialSpec& spec, Index n, double c) {
  const double sigma = std::max(spec.sigma, kSigmaFloor);
  if (spec.model == ObservationModel::Completion) {
    return lambda_completion(sigma, spec.m1, spec.m2, n, c);
  }
  return lambda_sensing(sigma, ensemble_pi(spec.ensemble, spec.m1, spec.m2), spec.m1, spec.m2, n,
                        c);
}

VectorXd draw_spectrum(const SpectrumRule& rule, Index r, double nu, Rng& rng) {
  VectorXd gamma(r);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto above = [&](double u) {
    const double lo = nu * (1.0 + rule.margin);
    return lo + u * lo;  // [lo, 2 lo]
  };
  switch (rule.kind) {
    case SpectrumRuleKind::AllAboveNu:
      for (Index i = 0; i < r; ++i) gamma(i) = above(unit(rng));
      break;
    case SpectrumRuleKind::Mixed:
      for (Index i = 0; i < rule.r1; ++i) gamma(i) = above(unit(rng));
      for (Index i = rule.r1; i < r; ++i) gamma(i) = rule.low_fraction * nu;
      break;
    case SpectrumRuleKind::Uniform:
      for (Index i = 0; i < r; ++i) gamma(i) = rule.low + unit(rng) * (rule.high - rule.low);
      break;
  }
  std::sort(gamma.data(), gamma.data() + gamma.size(), std::greater<>());
  return gamma;
}

}  // namespace

std::string_view to_string(ObservationModel model) {
  return model == ObservationModel::Completion ? "completion" : "sensing";
}

std::string PenaltyTemplate::label() const {
  std::string out(to_string(family));
  if (family == PenaltyFamily::Nuclear) return out;
  if (!b) return out + "(b=auto)";
  std::ostringstream os;
  os << out << "(b=" << *b << ")";
  return os.str();
}

void TrialSpec::validate() const {
  if (m1 < 1) throw ConfigError("m1", "m1 must be >= 1");
  if (m2 < 1) throw ConfigError("m2", "m2 must be >= 1");
  if (r < 1 || r > std::min(m1, m2)) {
    throw ConfigError("r", "r must satisfy 1 <= r <= min(m1, m2)");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "sigma must be >= 0");
  if (n_grid.empty() == rescaled_grid.empty()) {
    throw ConfigError("n_grid", "exactly one of n_grid and N_grid must be given");
  }
  for (Index n : n_grid) {
    if (n < 1) throw ConfigError("n_grid", "sample sizes must be >= 1");
  }
  for (double N : rescaled_grid) {
    if (!(N > 0.0)) throw ConfigError("N_grid", "rescaled sample sizes must be > 0");
  }
  if (penalties.empty()) throw ConfigError("penalties", "at least one penalty is required");
  for (const auto& p : penalties) {
    if (!p.b) continue;
    if (p.family == PenaltyFamily::Scad && !(*p.b > 2.0)) {
      throw ConfigError("penalties", "SCAD requires b > 2");
    }
    if (p.family == PenaltyFamily::Mcp && !(*p.b > 1.0)) {
      throw ConfigError("penalties", "MCP requires b > 1");
    }
  }
  if (!(c > 0.0)) throw ConfigError("c", "c must be > 0");
  if (repeats < 1) throw ConfigError("repeats", "repeats must be >= 1");
  if (probe_trials < 1) throw ConfigError("probe_trials", "probe_trials must be >= 1");
  if (!(oracle_match_tol > 0.0)) {
    throw ConfigError("oracle_match_tol", "oracle_match_tol must be > 0");
  }
  switch (spectrum.kind) {
    case SpectrumRuleKind::AllAboveNu:
      if (!(spectrum.margin >= 0.0)) throw ConfigError("spectrum", "margin must be >= 0");
      break;
    case SpectrumRuleKind::Mixed:
      if (spectrum.r1 < 0 || spectrum.r2 < 0 || spectrum.r1 + spectrum.r2 != r) {
        throw ConfigError("spectrum", "mixed spectrum needs r1 + r2 == r");
      }
      if (!(spectrum.low_fraction > 0.0 && spectrum.low_fraction < 1.0)) {
        throw ConfigError("spectrum", "low_fraction must lie in (0, 1)");
      }
      if (!(spectrum.margin >= 0.0)) throw ConfigError("spectrum", "margin must be >= 0");
      break;
    case SpectrumRuleKind::Uniform:
      if (!(spectrum.low > 0.0 && spectrum.high >= spectrum.low)) {
        throw ConfigError("spectrum", "uniform spectrum needs 0 < low <= high");
      }
      break;
  }
  if (spectrum_needs_nu(spectrum) && !reference_penalty(*this)) {
    throw ConfigError("spectrum", "a nu-relative spectrum needs a nonconvex penalty for nu");
  }
  if (model == ObservationModel::Completion &&
      ensemble.kind() != EnsembleKind::Identity) {
    throw ConfigError("ensemble", "a sensing ensemble is meaningless for completion");
  }
  if (ensemble.kind() == EnsembleKind::GeneralCholesky && ensemble.factor().rows() != m1 * m2) {
    throw ConfigError("ensemble", "Cholesky factor must be (m1*m2)x(m1*m2)");
  }
  try {
    solver.validate();
  } catch (const DomainError& e) {
    throw ConfigError("solver", e.what());
  }
}

std::vector<Index> TrialSpec::resolved_n() const {
  if (!n_grid.empty()) return n_grid;
  std::vector<Index> out;
  out.reserve(rescaled_grid.size());
  for (double N : rescaled_grid) out.push_back(n_from_rescaled(model, N, r, std::max(m1, m2)));
  return out;
}

Subspace sample_singular_frames(Rng& rng, Index m1, Index m2, Index r) {
  if (r < 0 || r > std::min(m1, m2)) {
    throw DimensionError("rank r must not exceed min(m1, m2)");
  }
  const MatrixXd g = gaussian_matrix(rng, m1, m2);
  Eigen::JacobiSVD<MatrixXd> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return Subspace(svd.matrixU().leftCols(r), svd.matrixV().leftCols(r));
}

GroundTruth assemble_ground_truth(const Subspace& frames, const VectorXd& gamma_values) {
  if (gamma_values.size() != frames.rank()) {
    throw DimensionError("need one singular value per frame column");
  }
  if ((gamma_values.array() <= 0.0).any()) throw DomainError("singular values must be positive");
  VectorXd gamma = gamma_values;
  std::sort(gamma.data(), gamma.data() + gamma.size(), std::greater<>());
  MatrixXd theta = frames.U() * gamma.asDiagonal() * frames.V().transpose();
  return GroundTruth{std::move(theta), frames, std::move(gamma)};
}

GroundTruth generate_ground_truth(Rng& rng, Index m1, Index m2, Index r,
                                  const VectorXd& gamma_values) {
  if (gamma_values.size() != r) throw DimensionError("gamma_values must have length r");
  return assemble_ground_truth(sample_singular_frames(rng, m1, m2, r), gamma_values);
}

double rescale_n(ObservationModel model, double n, Index r, Index m) {
  const double rm = static_cast<double>(r) * static_cast<double>(m);
  if (model == ObservationModel::Completion) return n / (rm * std::log(static_cast<double>(m)));
  return n / rm;
}

Index n_from_rescaled(ObservationModel model, double rescaled, Index r, Index m) {
  const double unit = rescale_n(model, 1.0, r, m);
  return std::max<Index>(1, static_cast<Index>(std::llround(rescaled / unit)));
}

TrialOutcome run_trial(const TrialSpec& spec, Index n, std::size_t penalty_index, int repeat) {
  spec.validate();
  if (penalty_index >= spec.penalties.size()) throw DomainError("penalty index out of range");
  const auto start = std::chrono::steady_clock::now();
  const Index M = std::max(spec.m1, spec.m2);
  const PenaltyTemplate& tmpl = spec.penalties[penalty_index];

  TrialOutcome out;
  out.model = spec.model;
  out.m1 = spec.m1;
  out.m2 = spec.m2;
  out.r = spec.r;
  out.n = n;
  out.rescaled_n = rescale_n(spec.model, static_cast<double>(n), spec.r, M);
  out.penalty_index = penalty_index;
  out.penalty = tmpl.label();
  out.repeat = repeat;
  // Data depend on (n, repeat) only, so every penalty sees the same instance.
  out.seed = derive_seed(spec.base_seed,
                         {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(repeat)});

  Rng frames_rng(derive_seed(out.seed, {kFrames}));
  Rng design_rng(derive_seed(out.seed, {kDesign}));
  Rng noise_rng(derive_seed(out.seed, {kNoise}));
  Rng spectrum_rng(derive_seed(out.seed, {kSpectrum}));
  Rng probe_rng(derive_seed(out.seed, {kProbe}));

  const Subspace frames = sample_singular_frames(frames_rng, spec.m1, spec.m2, spec.r);
  Design design = spec.model == ObservationModel::Completion
                      ? Design(sample_completion_design(design_rng, spec.m1, spec.m2, n))
                      : Design(sample_sensing_design(design_rng, spec.m1, spec.m2, n,
                                                     spec.ensemble));
  const VectorXd noise =
      spec.sigma > 0.0 ? gaussian_vector(noise_rng, n, spec.sigma) : VectorXd::Zero(n);

  if (spec.diagnostics || spec.lambda_rule == LambdaRule::Oracle) {
    out.curvature = probe_rsc(design, frames, spec.probe_trials, probe_rng);
  }

  double lambda = 0.0;
  if (spec.lambda_rule == LambdaRule::Theory) {
    lambda = noise_scale(spec, n, spec.c);
  } else {
    lambda = lambda_oracle(noise_scale(spec, n, 1.0), spec.r, out.curvature->rho_hat,
                           out.curvature->kappa_hat);
  }

  double nu_ref = 0.0;
  if (auto ref = reference_penalty(spec)) nu_ref = resolve_b(spec.penalties[*ref], spec) * lambda;
  const VectorXd gamma = draw_spectrum(spec.spectrum, spec.r, nu_ref, spectrum_rng);
  const GroundTruth truth = assemble_ground_truth(frames, gamma);

  VectorXd y = apply_forward(design, truth.theta_star) + noise;
  const ObservationSet obs(std::move(design), std::move(y), spec.sigma);

  const PenaltySpec penalty(tmpl.family, lambda, resolve_b(tmpl, spec));
  out.lambda = penalty.lambda();
  out.b = penalty.b();

  const double truth_norm = truth.theta_star.norm();
  const double cells = static_cast<double>(spec.m1) * static_cast<double>(spec.m2);
  try {
    const FitResult fit_result = fit(obs, penalty, spec.solver);
    const MatrixXd delta = fit_result.theta_hat - truth.theta_star;
    out.frob_err = delta.norm();
    out.mse = out.frob_err * out.frob_err / cells;
    out.rel_err = out.frob_err / truth_norm;
    out.rank_hat = fit_result.rank_hat;
    out.rank_correct = fit_result.rank_hat == spec.r;
    out.converged = fit_result.converged;
    out.iterations = fit_result.iterations;
    out.fixed_point_residual = fit_result.fixed_point_residual;

    if (spec.diagnostics) {
      const SpectralSplit split = split_spectrum(truth.gamma_star, penalty.nu());
      const Subspace s1 = truth.subspace.select(split.s1);
      const double tau = tau_value(obs, truth.theta_star, s1);
      const double kappa = out.curvature->kappa_hat;
      if (kappa > penalty.zeta_minus()) {
        out.bound = error_bound_general(tau, penalty.lambda(), kappa, penalty.zeta_minus(),
                                        split.r1(), split.r2());
      }
      out.cone = cone_condition(delta, truth.subspace);
      if (out.bound && out.cone->in_cone && out.converged) {
        out.bound_holds = out.frob_err <= out.bound->total;
      }
      if (penalty.is_nonconvex() && kappa > 0.0) {
        const double adj = spectral_norm(apply_adjoint(obs.design, noise));
        out.oracle_gap =
            oracle_condition_gap(truth.gamma_star, penalty.nu(), spec.r, adj, n, kappa);
      }
    }

    if (penalty.is_nonconvex() && spec.spectrum.kind == SpectrumRuleKind::AllAboveNu) {
      const OracleResult oracle = solve_oracle(obs, truth.subspace);
      const double scale = std::max(oracle.theta.norm(), 1e-300);
      out.oracle_rel_diff = (fit_result.theta_hat - oracle.theta).norm() / scale;
      out.oracle_match = *out.oracle_rel_diff <= spec.oracle_match_tol;
    }
  } catch (const DivergenceError& e) {
    out.converged = false;
    out.iterations = e.iteration();
    out.failure = e.what();
    out.frob_err = out.mse = out.rel_err = std::numeric_limits<double>::quiet_NaN();
    out.fixed_point_residual = std::numeric_limits<double>::quiet_NaN();
  }

  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

GridResult run_grid(const TrialSpec& spec, int jobs) {
  spec.validate();
  const std::vector<Index> ns = spec.resolved_n();
  const std::size_t np = spec.penalties.size();
  const std::size_t reps = static_cast<std::size_t>(spec.repeats);
  const std::size_t total = ns.size() * np * reps;

  GridResult result;
  result.trials.resize(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= total) return;
      const std::size_t ni = k / (np * reps);
      const std::size_t pi = (k / reps) % np;
      const int rep = static_cast<int>(k % reps);
      try {
        result.trials[k] = run_trial(spec, ns[ni], pi, rep);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(total);
        return;
      }
    }
  };

  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const Index M = std::max(spec.m1, spec.m2);
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    for (std::size_t pi = 0; pi < np; ++pi) {
      CellSummary cell;
      cell.n = ns[ni];
      cell.rescaled_n = rescale_n(spec.model, static_cast<double>(ns[ni]), spec.r, M);
      cell.penalty_index = pi;
      cell.penalty = spec.penalties[pi].label();
      std::vector<double> mses;
      double frob_sum = 0.0;
      double lambda_sum = 0.0;
      int rank_hits = 0;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const TrialOutcome& t = result.trials[(ni * np + pi) * reps + rep];
        ++cell.count;
        lambda_sum += t.lambda;
        if (t.converged) ++cell.converged;
        if (t.rank_correct) ++rank_hits;
        if (std::isfinite(t.mse)) {
          mses.push_back(t.mse);
          frob_sum += t.frob_err;
        }
      }
      cell.mean_lambda = lambda_sum / cell.count;
      cell.rank_recovery_rate = static_cast<double>(rank_hits) / cell.count;
      if (!mses.empty()) {
        const double k = static_cast<double>(mses.size());
        cell.mean_mse = std::accumulate(mses.begin(), mses.end(), 0.0) / k;
        cell.mean_frob_err = frob_sum / k;
        if (mses.size() > 1) {
          double ss = 0.0;
          for (double v : mses) ss += (v - cell.mean_mse) * (v - cell.mean_mse);
          cell.std_mse = std::sqrt(ss / (k - 1.0));
        }
      } else {
        cell.mean_mse = cell.mean_frob_err = std::numeric_limits<double>::quiet_NaN();
      }
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

std::pair<std::vector<Triplet>, std::vector<Triplet>> holdout_split(
    const std::vector<Triplet>& triplets, double train_fraction, Rng& rng) {
  if (triplets.empty()) throw DomainError("holdout_split: no triplets");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("holdout_split: fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(triplets.size())));
  if (n_train == triplets.size()) throw DomainError("holdout_split: empty test split");
  if (n_train == 0) throw DomainError("holdout_split: empty training split");
  std::pair<std::vector<Triplet>, std::vector<Triplet>> out;
  out.first.reserve(n_train);
  out.second.reserve(triplets.size() - n_train);
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_train ? out.first : out.second).push_back(triplets[order[k]]);
  }
  return out;
}

double rmse(const MatrixXd& predicted, const std::vector<Triplet>& test) {
  if (test.empty()) throw DomainError("rmse: empty test set");
  double ss = 0.0;
  for (const auto& t : test) {
    if (t.row < 0 || t.row >= predicted.rows() || t.col < 0 || t.col >= predicted.cols()) {
      throw DimensionError("rmse: test entry outside the predicted matrix");
    }
    const double d = predicted(t.row, t.col) - t.value;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(test.size()));
}

}  // namespace lowrank
