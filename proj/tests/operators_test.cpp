#include <gtest/gtest.h>

#include <cmath>

#include "lowrank/errors.hpp"
#include "lowrank/operators.hpp"
#include "lowrank/simlab.hpp"
#include "oracles.hpp"

using namespace lowrank;

namespace {

double inner(const MatrixXd& A, const MatrixXd& B) { return (A.array() * B.array()).sum(); }

// X_i as explicit dense matrices.
std::vector<MatrixXd> dense_observations(const CompletionDesign& d) {
  std::vector<MatrixXd> out;
  for (const auto& e : d.entries()) {
    MatrixXd X = MatrixXd::Zero(d.rows(), d.cols());
    X(e.row, e.col) = 1.0;
    out.push_back(X);
  }
  return out;
}

Subspace frames(Rng& rng, Index m1, Index m2, Index r) { return sample_singular_frames(rng, m1, m2, r); }

}  // namespace

TEST(CompletionDesign, Validation) {
  EXPECT_THROW(CompletionDesign(2, 2, {{2, 0}}), DimensionError);
  EXPECT_THROW(CompletionDesign(2, 2, {{0, -1}}), DimensionError);
  EXPECT_THROW(CompletionDesign(2, 2, {}), DimensionError);
  EXPECT_THROW(CompletionDesign(0, 2, {{0, 0}}), DimensionError);
  EXPECT_NO_THROW(CompletionDesign(2, 2, {{1, 1}, {1, 1}}));
}

TEST(SensingEnsemble, RejectsNonconformingFactor) {
  MatrixXd upper = MatrixXd::Identity(4, 4);
  upper(0, 1) = 0.5;
  EXPECT_THROW(SensingEnsemble::cholesky(upper), DomainError);
  MatrixXd zero_diag = MatrixXd::Identity(4, 4);
  zero_diag(2, 2) = 0.0;
  EXPECT_THROW(SensingEnsemble::cholesky(zero_diag), DomainError);
  EXPECT_THROW(SensingEnsemble::cholesky(MatrixXd::Identity(4, 3)), DimensionError);
  Rng rng(1);
  EXPECT_THROW(sample_sensing_design(rng, 2, 3, 5, SensingEnsemble::cholesky(MatrixXd::Identity(4, 4))),
               DimensionError);
}

TEST(Forward, CompletionReadsCoordinates) {
  const Design d = CompletionDesign(2, 2, {{0, 1}});
  MatrixXd theta(2, 2);
  theta << 1, 2, 3, 4;
  const VectorXd y = apply_forward(d, theta);
  ASSERT_EQ(y.size(), 1);
  EXPECT_EQ(y(0), 2.0);
}

TEST(Forward, SensingInnerProduct) {
  const Index m1 = 3, m2 = 4;
  MatrixXd X = MatrixXd::Zero(m1, m2);
  for (Index i = 0; i < std::min(m1, m2); ++i) X(i, i) = 1.0;
  MatrixXd stacked(1, m1 * m2);
  stacked.row(0) = Eigen::Map<const VectorXd>(X.data(), X.size()).transpose();
  const Design d = SensingDesign(m1, m2, stacked, SensingEnsemble::identity());
  const MatrixXd theta = MatrixXd::Identity(m1, m2);
  EXPECT_DOUBLE_EQ(apply_forward(d, theta)(0), 3.0);
  EXPECT_EQ(std::get<SensingDesign>(d).observation_matrix(0), X);
}

TEST(Forward, ZeroMapsToZero) {
  Rng rng(2);
  const Design d = sample_sensing_design(rng, 4, 5, 7, SensingEnsemble::identity());
  EXPECT_EQ(apply_forward(d, MatrixXd::Zero(4, 5)), VectorXd::Zero(7));
  EXPECT_THROW(apply_forward(d, MatrixXd::Zero(5, 4)), DimensionError);
}

TEST(Adjoint, CompletionScatter) {
  const Design single = CompletionDesign(2, 2, {{0, 1}});
  MatrixXd expected = MatrixXd::Zero(2, 2);
  expected(0, 1) = 1.0;
  EXPECT_EQ(apply_adjoint(single, VectorXd::Ones(1)), expected);

  const Design dup = CompletionDesign(2, 2, {{0, 0}, {0, 0}});
  MatrixXd twice = MatrixXd::Zero(2, 2);
  twice(0, 0) = 2.0;
  EXPECT_EQ(apply_adjoint(dup, VectorXd::Ones(2)), twice);
  EXPECT_THROW(apply_adjoint(dup, VectorXd::Ones(3)), DimensionError);
}

TEST(Adjoint, InnerProductIdentityBothDesigns) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const Index m1 = 2 + k % 6, m2 = 3 + k % 4, n = 5 + k % 20;
    const Design d = k % 2 ? Design(sample_completion_design(rng, m1, m2, n))
                           : Design(sample_sensing_design(rng, m1, m2, n, SensingEnsemble::identity()));
    const MatrixXd theta = gaussian_matrix(rng, m1, m2);
    const VectorXd v = gaussian_vector(rng, n);
    const double lhs = apply_forward(d, theta).dot(v);
    EXPECT_NEAR(lhs, inner(theta, apply_adjoint(d, v)), 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Adjoint, CompletionMatchesDenseReference) {
  Rng rng(4);
  for (int k = 0; k < 30; ++k) {
    const Index m1 = 1 + k % 5, m2 = 1 + (k / 5) % 5, n = 1 + k % 9;
    const CompletionDesign cd = sample_completion_design(rng, m1, m2, n);
    const Design d = cd;
    const auto xs = dense_observations(cd);
    const MatrixXd theta = gaussian_matrix(rng, m1, m2);
    const VectorXd v = gaussian_vector(rng, n);
    const VectorXd y = apply_forward(d, theta);
    MatrixXd adj = MatrixXd::Zero(m1, m2);
    for (Index i = 0; i < n; ++i) {
      EXPECT_EQ(y(i), inner(xs[static_cast<std::size_t>(i)], theta));
      adj += v(i) * xs[static_cast<std::size_t>(i)];
    }
    EXPECT_EQ(apply_adjoint(d, v), adj);
  }
}

TEST(Loss, ExactFitHasZeroLossAndGradient) {
  Rng rng(5);
  const Design d = sample_sensing_design(rng, 3, 4, 10, SensingEnsemble::identity());
  const MatrixXd theta = gaussian_matrix(rng, 3, 4);
  const ObservationSet obs(d, apply_forward(d, theta), 0.0);
  EXPECT_NEAR(loss_value(obs, theta), 0.0, 1e-28);
  EXPECT_LE(loss_gradient(obs, theta).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Loss, HandArithmetic) {
  VectorXd y(1);
  y << 3.0;
  const ObservationSet obs(CompletionDesign(2, 2, {{0, 0}}), y, 0.0);
  EXPECT_DOUBLE_EQ(loss_value(obs, MatrixXd::Zero(2, 2)), 4.5);
  MatrixXd g = MatrixXd::Zero(2, 2);
  g(0, 0) = -3.0;
  EXPECT_EQ(loss_gradient(obs, MatrixXd::Zero(2, 2)), g);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  for (int k = 0; k < 10; ++k) {
    const Design d = k % 2 ? Design(sample_completion_design(rng, 5, 4, 30))
                           : Design(sample_sensing_design(rng, 5, 4, 30, SensingEnsemble::identity()));
    const ObservationSet obs(d, gaussian_vector(rng, 30), 1.0);
    const MatrixXd theta = gaussian_matrix(rng, 5, 4);
    const MatrixXd fd =
        oracle::finite_difference_gradient([&](const MatrixXd& X) { return loss_value(obs, X); }, theta);
    EXPECT_LE((fd - loss_gradient(obs, theta)).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(Loss, GradientAtTruthIsNegativeScaledAdjointNoise) {
  Rng rng(7);
  const Design d = sample_sensing_design(rng, 4, 4, 25, SensingEnsemble::identity());
  const MatrixXd theta = gaussian_matrix(rng, 4, 4);
  const VectorXd eps = gaussian_vector(rng, 25, 0.3);
  const ObservationSet obs(d, apply_forward(d, theta) + eps, 0.3);
  EXPECT_LE((loss_gradient(obs, theta) + apply_adjoint(d, eps) / 25.0).norm(), 1e-12);
}

TEST(ObservationSet, Validation) {
  EXPECT_THROW(ObservationSet(CompletionDesign(2, 2, {{0, 0}}), VectorXd::Zero(2), 0.0), DimensionError);
  EXPECT_THROW(ObservationSet(CompletionDesign(2, 2, {{0, 0}}), VectorXd::Zero(1), -1.0), DomainError);
}

TEST(Subspace, RejectsNonOrthonormalFrames) {
  MatrixXd U(3, 1);
  U << 1, 1, 0;
  EXPECT_THROW(Subspace(U, MatrixXd::Identity(3, 1)), DomainError);
  EXPECT_THROW(Subspace(MatrixXd::Identity(3, 2), MatrixXd::Identity(3, 1)), DimensionError);
  EXPECT_NO_THROW(Subspace(MatrixXd(3, 0), MatrixXd(4, 0)));
}

TEST(Projection, MembersOfFAreFixed) {
  Rng rng(8);
  const Subspace sub = frames(rng, 6, 5, 2);
  const MatrixXd A = sub.U() * gaussian_matrix(rng, 2, 2) * sub.V().transpose();
  EXPECT_LE((project_onto(sub, A) - A).norm(), 1e-12);
  EXPECT_LE(project_complement(sub, A).norm(), 1e-12);
}

TEST(Projection, CanonicalBasis) {
  const Subspace sub(MatrixXd::Identity(2, 1), MatrixXd::Identity(2, 1));
  MatrixXd A(2, 2);
  A << 1, 2, 3, 4;
  MatrixXd onto(2, 2), comp(2, 2);
  onto << 1, 0, 0, 0;
  comp << 0, 0, 0, 4;
  EXPECT_EQ(project_onto(sub, A), onto);
  EXPECT_EQ(project_complement(sub, A), comp);
  EXPECT_THROW(project_onto(sub, MatrixXd::Zero(3, 2)), DimensionError);
}

TEST(Projection, Algebra) {
  Rng rng(9);
  for (int k = 0; k < 50; ++k) {
    const Subspace sub = frames(rng, 7, 6, 1 + k % 4);
    const MatrixXd A = gaussian_matrix(rng, 7, 6);
    const MatrixXd P = project_onto(sub, A);
    const MatrixXd Q = project_complement(sub, A);
    EXPECT_LE((project_onto(sub, P) - P).norm(), 1e-10);
    EXPECT_LE((project_complement(sub, Q) - Q).norm(), 1e-10);
    EXPECT_LE(project_onto(sub, Q).norm(), 1e-10);
    EXPECT_LE(project_complement(sub, P).norm(), 1e-10);
    EXPECT_NEAR(P.squaredNorm() + (A - P).squaredNorm(), A.squaredNorm(), 1e-9);
    // A - Pi_perp(A) keeps F plus the mixed blocks.
    const MatrixXd rest = A - Q;
    EXPECT_LE((project_onto(sub, rest) - P).norm(), 1e-10);
    EXPECT_LE(project_complement(sub, rest).norm(), 1e-10);
  }
}

TEST(Sampling, CompletionHitCountsAreUniform) {
  Rng rng(10);
  const Index m1 = 4, m2 = 5, n = 100000;
  const MatrixXd counts = sample_completion_design(rng, m1, m2, n).hit_counts();
  const double p = 1.0 / (m1 * m2);
  const double mean = n * p, sd = std::sqrt(n * p * (1.0 - p));
  EXPECT_EQ(counts.sum(), static_cast<double>(n));
  EXPECT_LE((counts.array() - mean).abs().maxCoeff(), 4.0 * sd);
}

TEST(Sampling, Deterministic) {
  Rng a(11), b(11);
  EXPECT_EQ(sample_completion_design(a, 5, 6, 40).entries(),
            sample_completion_design(b, 5, 6, 40).entries());
  Rng c(12), d(12);
  EXPECT_EQ(sample_sensing_design(c, 3, 3, 8, SensingEnsemble::identity()).stacked(),
            sample_sensing_design(d, 3, 3, 8, SensingEnsemble::identity()).stacked());
  Rng e(13);
  const CompletionDesign one = sample_completion_design(e, 3, 2, 1);
  ASSERT_EQ(one.size(), 1);
  EXPECT_LT(one.entries()[0].row, 3);
  EXPECT_LT(one.entries()[0].col, 2);
}

TEST(Sampling, SensingEntryVariance) {
  Rng rng(14);
  const SensingDesign id = sample_sensing_design(rng, 10, 10, 1000, SensingEnsemble::identity());
  const double var = id.stacked().squaredNorm() / static_cast<double>(id.stacked().size());
  EXPECT_NEAR(var, 1.0, 0.02);
  const SensingDesign two = sample_sensing_design(
      rng, 10, 10, 1000, SensingEnsemble::cholesky(2.0 * MatrixXd::Identity(100, 100)));
  const double var2 = two.stacked().squaredNorm() / static_cast<double>(two.stacked().size());
  EXPECT_NEAR(var2, 4.0, 0.1);
}

TEST(Observations, NoiseFreeAndNoisy) {
  Rng rng(15);
  const Design d = sample_completion_design(rng, 5, 5, 100000);
  const MatrixXd theta = gaussian_matrix(rng, 5, 5);
  const ObservationSet exact = generate_observations(d, theta, 0.0, rng);
  EXPECT_EQ(exact.y, apply_forward(d, theta));
  const ObservationSet noisy = generate_observations(d, theta, 0.7, rng);
  const double var = (noisy.y - exact.y).squaredNorm() / 100000.0;
  EXPECT_NEAR(var, 0.49, 0.05 * 0.49);
  Rng r1(16), r2(16);
  EXPECT_EQ(generate_observations(d, theta, 0.7, r1).y, generate_observations(d, theta, 0.7, r2).y);
}

TEST(Spikiness, Extremes) {
  EXPECT_NEAR(spikiness(MatrixXd::Ones(6, 6)), 1.0, 1e-15);
  MatrixXd spike = MatrixXd::Zero(6, 6);
  spike(0, 0) = 3.0;
  EXPECT_NEAR(spikiness(spike), 6.0, 1e-15);
  EXPECT_THROW(spikiness(MatrixXd::Zero(2, 2)), DomainError);
  Rng rng(17);
  const MatrixXd g = gaussian_matrix(rng, 10, 10);
  const double s = spikiness(g);
  EXPECT_GE(s, 1.0);
  EXPECT_LE(s, 10.0);
  EXPECT_NEAR(s, 10.0 * g.cwiseAbs().maxCoeff() / g.norm(), 1e-12);
}

TEST(Triplets, BuildCompletionObservations) {
  const std::vector<Triplet> t{{0, 1, 2.5}, {2, 0, -1.0}};
  const ObservationSet obs = observations_from_triplets(t, 3, 2);
  EXPECT_EQ(obs.n(), 2);
  EXPECT_EQ(obs.y(1), -1.0);
  EXPECT_THROW(observations_from_triplets({{3, 0, 1.0}}, 3, 2), DimensionError);
}
