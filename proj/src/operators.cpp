#include "lowrank/operators.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "lowrank/errors.hpp"

namespace lowrank {

namespace {

constexpr double kOrthonormalTol = 1e-10;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_shape(const Design& design, const MatrixXd& theta, const char* what) {
  if (theta.rows() != design_rows(design) || theta.cols() != design_cols(design)) {
    throw DimensionError(std::string(what) + ": matrix is " + std::to_string(theta.rows()) + "x" +
                         std::to_string(theta.cols()) + ", design expects " +
                         std::to_string(design_rows(design)) + "x" +
                         std::to_string(design_cols(design)));
  }
}

bool is_orthonormal(const MatrixXd& frame) {
  if (frame.cols() == 0) return true;
  const MatrixXd gram = frame.transpose() * frame;
  return (gram - MatrixXd::Identity(frame.cols(), frame.cols())).cwiseAbs().maxCoeff() <=
         kOrthonormalTol;
}

}  // namespace

CompletionDesign::CompletionDesign(Index m1, Index m2, std::vector<EntryIndex> entries)
    : m1_(m1), m2_(m2), entries_(std::move(entries)) {
  if (m1 < 1 || m2 < 1) throw DimensionError("completion design needs positive dimensions");
  if (entries_.empty()) throw DimensionError("completion design needs at least one entry");
  for (const auto& e : entries_) {
    if (e.row < 0 || e.row >= m1 || e.col < 0 || e.col >= m2) {
      throw DimensionError("completion entry (" + std::to_string(e.row) + "," +
                           std::to_string(e.col) + ") out of range");
    }
  }
}

MatrixXd CompletionDesign::hit_counts() const {
  MatrixXd counts = MatrixXd::Zero(m1_, m2_);
  for (const auto& e : entries_) counts(e.row, e.col) += 1.0;
  return counts;
}

SensingEnsemble SensingEnsemble::cholesky(MatrixXd lower_factor) {
  if (lower_factor.rows() != lower_factor.cols() || lower_factor.rows() == 0) {
    throw DimensionError("Cholesky factor must be a non-empty square matrix");
  }
  for (Index j = 0; j < lower_factor.cols(); ++j) {
    if (!(lower_factor(j, j) > 0.0)) {
      throw DomainError("Cholesky factor must have a positive diagonal");
    }
    for (Index i = 0; i < j; ++i) {
      if (lower_factor(i, j) != 0.0) throw DomainError("Cholesky factor must be lower triangular");
    }
  }
  SensingEnsemble e;
  e.kind_ = EnsembleKind::GeneralCholesky;
  e.factor_ = std::move(lower_factor);
  return e;
}

SensingDesign::SensingDesign(Index m1, Index m2, MatrixXd stacked, SensingEnsemble ensemble)
    : m1_(m1), m2_(m2), stacked_(std::move(stacked)), ensemble_(std::move(ensemble)) {
  if (m1 < 1 || m2 < 1) throw DimensionError("sensing design needs positive dimensions");
  if (stacked_.rows() < 1) throw DimensionError("sensing design needs at least one matrix");
  if (stacked_.cols() != m1 * m2) {
    throw DimensionError("sensing design rows must have length m1*m2");
  }
  if (ensemble_.kind() == EnsembleKind::GeneralCholesky && ensemble_.factor().rows() != m1 * m2) {
    throw DimensionError("Cholesky factor must be (m1*m2)x(m1*m2)");
  }
}

MatrixXd SensingDesign::observation_matrix(Index i) const {
  const VectorXd row = stacked_.row(i).transpose();
  return Eigen::Map<const MatrixXd>(row.data(), m1_, m2_);
}

Index design_rows(const Design& design) {
  return std::visit([](const auto& d) { return d.rows(); }, design);
}
Index design_cols(const Design& design) {
  return std::visit([](const auto& d) { return d.cols(); }, design);
}
Index design_size(const Design& design) {
  return std::visit([](const auto& d) { return d.size(); }, design);
}

ObservationSet::ObservationSet(Design d, VectorXd y_in, double sigma_in)
    : design(std::move(d)), y(std::move(y_in)), sigma(sigma_in) {
  if (y.size() != design_size(design)) {
    throw DimensionError("response length " + std::to_string(y.size()) +
                         " does not match design size " + std::to_string(design_size(design)));
  }
  if (!(sigma >= 0.0)) throw DomainError("noise level sigma must be nonnegative");
}

Subspace::Subspace(MatrixXd U, MatrixXd V) : U_(std::move(U)), V_(std::move(V)) {
  if (U_.cols() != V_.cols()) throw DimensionError("subspace frames must have equal rank");
  if (!is_orthonormal(U_) || !is_orthonormal(V_)) {
    throw DomainError("subspace frames must have orthonormal columns");
  }
}

Subspace Subspace::select(std::span<const Index> columns) const {
  MatrixXd U(U_.rows(), static_cast<Index>(columns.size()));
  MatrixXd V(V_.rows(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const Index c = columns[k];
    if (c < 0 || c >= rank()) throw DimensionError("subspace column index out of range");
    U.col(static_cast<Index>(k)) = U_.col(c);
    V.col(static_cast<Index>(k)) = V_.col(c);
  }
  return Subspace(std::move(U), std::move(V));
}

VectorXd apply_forward(const Design& design, const MatrixXd& theta) {
  require_shape(design, theta, "apply_forward");
  return std::visit(
      overloaded{
          [&](const CompletionDesign& d) {
            VectorXd out(d.size());
            const auto& entries = d.entries();
            for (std::size_t i = 0; i < entries.size(); ++i) {
              out(static_cast<Index>(i)) = theta(entries[i].row, entries[i].col);
            }
            return out;
          },
          [&](const SensingDesign& d) {
            const Eigen::Map<const VectorXd> vec(theta.data(), theta.size());
            return VectorXd(d.stacked() * vec);
          },
      },
      design);
}

MatrixXd apply_adjoint(const Design& design, const VectorXd& v) {
  if (v.size() != design_size(design)) {
    throw DimensionError("apply_adjoint: vector length " + std::to_string(v.size()) +
                         " does not match design size " + std::to_string(design_size(design)));
  }
  return std::visit(
      overloaded{
          [&](const CompletionDesign& d) {
            MatrixXd out = MatrixXd::Zero(d.rows(), d.cols());
            const auto& entries = d.entries();
            for (std::size_t i = 0; i < entries.size(); ++i) {
              out(entries[i].row, entries[i].col) += v(static_cast<Index>(i));
            }
            return out;
          },
          [&](const SensingDesign& d) {
            const VectorXd vec = d.stacked().transpose() * v;
            return MatrixXd(Eigen::Map<const MatrixXd>(vec.data(), d.rows(), d.cols()));
          },
      },
      design);
}

double loss_value(const ObservationSet& obs, const MatrixXd& theta) {
  const VectorXd r = obs.y - apply_forward(obs.design, theta);
  return r.squaredNorm() / (2.0 * static_cast<double>(obs.n()));
}

MatrixXd loss_gradient(const ObservationSet& obs, const MatrixXd& theta) {
  const VectorXd r = apply_forward(obs.design, theta) - obs.y;
  return apply_adjoint(obs.design, r) / static_cast<double>(obs.n());
}

MatrixXd project_onto(const Subspace& sub, const MatrixXd& A) {
  if (A.rows() != sub.U().rows() || A.cols() != sub.V().rows()) {
    throw DimensionError("project_onto: matrix shape does not match subspace");
  }
  return sub.U() * (sub.U().transpose() * A * sub.V()) * sub.V().transpose();
}

MatrixXd project_complement(const Subspace& sub, const MatrixXd& A) {
  if (A.rows() != sub.U().rows() || A.cols() != sub.V().rows()) {
    throw DimensionError("project_complement: matrix shape does not match subspace");
  }
  const MatrixXd left = A - sub.U() * (sub.U().transpose() * A);
  return left - (left * sub.V()) * sub.V().transpose();
}

CompletionDesign sample_completion_design(Rng& rng, Index m1, Index m2, Index n) {
  if (n < 1) throw DimensionError("sample_completion_design requires n >= 1");
  if (m1 < 1 || m2 < 1) throw DimensionError("sample_completion_design requires m1, m2 >= 1");
  std::uniform_int_distribution<Index> row(0, m1 - 1);
  std::uniform_int_distribution<Index> col(0, m2 - 1);
  std::vector<EntryIndex> entries(static_cast<std::size_t>(n));
  for (auto& e : entries) {
    e.row = row(rng);
    e.col = col(rng);
  }
  return CompletionDesign(m1, m2, std::move(entries));
}

SensingDesign sample_sensing_design(Rng& rng, Index m1, Index m2, Index n,
                                    const SensingEnsemble& ensemble) {
  if (n < 1) throw DimensionError("sample_sensing_design requires n >= 1");
  const Index p = m1 * m2;
  if (ensemble.kind() == EnsembleKind::GeneralCholesky && ensemble.factor().rows() != p) {
    throw DimensionError("Cholesky factor must be (m1*m2)x(m1*m2)");
  }
  // g_i fills row i of the stack; vec(X_i) = L g_i.
  MatrixXd stacked(n, p);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) stacked(i, j) = normal(rng);
  if (ensemble.kind() == EnsembleKind::GeneralCholesky) {
    stacked = stacked * ensemble.factor().transpose();
  }
  return SensingDesign(m1, m2, std::move(stacked), ensemble);
}

ObservationSet generate_observations(const Design& design, const MatrixXd& theta_star,
                                     double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw DomainError("sigma must be nonnegative");
  VectorXd y = apply_forward(design, theta_star);
  if (sigma > 0.0) y += gaussian_vector(rng, y.size(), sigma);
  return ObservationSet(design, std::move(y), sigma);
}

ObservationSet observations_from_triplets(const std::vector<Triplet>& triplets, Index m1, Index m2,
                                          double sigma) {
  std::vector<EntryIndex> entries;
  entries.reserve(triplets.size());
  VectorXd y(static_cast<Index>(triplets.size()));
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    entries.push_back({triplets[i].row, triplets[i].col});
    y(static_cast<Index>(i)) = triplets[i].value;
  }
  return ObservationSet(CompletionDesign(m1, m2, std::move(entries)), std::move(y), sigma);
}

double spikiness(const MatrixXd& theta) {
  const double fro = theta.norm();
  if (!(fro > 0.0)) throw DomainError("spikiness is undefined for the zero matrix");
  const double scale = std::sqrt(static_cast<double>(theta.rows() * theta.cols()));
  return scale * theta.cwiseAbs().maxCoeff() / fro;
}

}  // namespace lowrank
