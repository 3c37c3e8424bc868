#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lowrank/rng.hpp"

namespace lowrank {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EntryIndex {
  Index row = 0;
  Index col = 0;
  friend bool operator==(const EntryIndex&, const EntryIndex&) = default;
};

/// Uniformly sampled entries X_i = e_j e_k^T; indices are 0-based and may repeat.
class CompletionDesign {
 public:
  CompletionDesign(Index m1, Index m2, std::vector<EntryIndex> entries);

  Index rows() const noexcept { return m1_; }
  Index cols() const noexcept { return m2_; }
  Index size() const noexcept { return static_cast<Index>(entries_.size()); }
  const std::vector<EntryIndex>& entries() const noexcept { return entries_; }

  // Number of times each cell was sampled.
  MatrixXd hit_counts() const;

 private:
  Index m1_;
  Index m2_;
  std::vector<EntryIndex> entries_;
};

enum class EnsembleKind { Identity, GeneralCholesky };

/// Sigma-ensemble described by a lower-triangular factor L with Sigma = L L^T
/// over column-major vec(X). Identity skips the factor entirely.
class SensingEnsemble {
 public:
  static SensingEnsemble identity() { return SensingEnsemble(); }
  // Throws DimensionError/DomainError unless L is square, lower triangular and
  // has a positive diagonal.
  static SensingEnsemble cholesky(MatrixXd lower_factor);

  EnsembleKind kind() const noexcept { return kind_; }
  const MatrixXd& factor() const noexcept { return factor_; }

 private:
  SensingEnsemble() = default;
  EnsembleKind kind_ = EnsembleKind::Identity;
  MatrixXd factor_;
};

/// Dense Gaussian observation matrices, stored stacked: row i of stacked() is
/// vec(X_i)^T in column-major order.
class SensingDesign {
 public:
  SensingDesign(Index m1, Index m2, MatrixXd stacked, SensingEnsemble ensemble);

  Index rows() const noexcept { return m1_; }
  Index cols() const noexcept { return m2_; }
  Index size() const noexcept { return stacked_.rows(); }
  const MatrixXd& stacked() const noexcept { return stacked_; }
  const SensingEnsemble& ensemble() const noexcept { return ensemble_; }

  MatrixXd observation_matrix(Index i) const;

 private:
  Index m1_;
  Index m2_;
  MatrixXd stacked_;
  SensingEnsemble ensemble_;
};

/// One observed entry (0-based row, column) with its value.
struct Triplet {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

using Design = std::variant<CompletionDesign, SensingDesign>;

Index design_rows(const Design& design);
Index design_cols(const Design& design);
Index design_size(const Design& design);

struct ObservationSet {
  ObservationSet(Design design, VectorXd y, double sigma);

  Design design;
  VectorXd y;
  double sigma;

  Index n() const { return design_size(design); }
};

/// Pair of orthonormal frames (U, V) spanning the column and row spaces of F.
/// Zero columns is allowed and gives the trivial subspace.
class Subspace {
 public:
  Subspace(MatrixXd U, MatrixXd V);

  const MatrixXd& U() const noexcept { return U_; }
  const MatrixXd& V() const noexcept { return V_; }
  Index rank() const noexcept { return U_.cols(); }

  // Sub-frame keeping the listed columns of both U and V.
  Subspace select(std::span<const Index> columns) const;

 private:
  MatrixXd U_;
  MatrixXd V_;
};

VectorXd apply_forward(const Design& design, const MatrixXd& theta);
MatrixXd apply_adjoint(const Design& design, const VectorXd& v);

// ||y - X(theta)||^2 / (2n)
double loss_value(const ObservationSet& obs, const MatrixXd& theta);
// X*(X(theta) - y) / n
MatrixXd loss_gradient(const ObservationSet& obs, const MatrixXd& theta);

// U U^T A V V^T
MatrixXd project_onto(const Subspace& sub, const MatrixXd& A);
// (I - U U^T) A (I - V V^T)
MatrixXd project_complement(const Subspace& sub, const MatrixXd& A);

CompletionDesign sample_completion_design(Rng& rng, Index m1, Index m2, Index n);
SensingDesign sample_sensing_design(Rng& rng, Index m1, Index m2, Index n,
                                    const SensingEnsemble& ensemble);

ObservationSet generate_observations(const Design& design, const MatrixXd& theta_star,
                                     double sigma, Rng& rng);

// Completion observations read straight from triplets, in input order.
ObservationSet observations_from_triplets(const std::vector<Triplet>& triplets, Index m1, Index m2,
                                          double sigma = 0.0);

// sqrt(m1 m2) ||Theta||_inf / ||Theta||_F; throws DomainError on the zero matrix.
double spikiness(const MatrixXd& theta);

}  // namespace lowrank
