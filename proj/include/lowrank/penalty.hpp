#pragma once

#include <span>
#include <string>
#include <string_view>

namespace lowrank {

enum class PenaltyFamily { Nuclear, Scad, Mcp };

std::string_view to_string(PenaltyFamily family);
// Accepts "nuclear", "scad", "mcp". Throws DomainError otherwise.
PenaltyFamily parse_penalty_family(std::string_view name);

/// Scalar penalty p_lambda applied to singular values.
///
/// Validated at construction: lambda > 0, b > 2 for SCAD, b > 1 for MCP.
/// For the nuclear family b is ignored and stored as 0.
class PenaltySpec {
 public:
  PenaltySpec(PenaltyFamily family, double lambda, double b = 0.0);

  static PenaltySpec nuclear(double lambda) { return {PenaltyFamily::Nuclear, lambda}; }
  static PenaltySpec scad(double lambda, double b) { return {PenaltyFamily::Scad, lambda, b}; }
  static PenaltySpec mcp(double lambda, double b) { return {PenaltyFamily::Mcp, lambda, b}; }

  PenaltyFamily family() const noexcept { return family_; }
  double lambda() const noexcept { return lambda_; }
  double b() const noexcept { return b_; }
  bool is_nonconvex() const noexcept { return family_ != PenaltyFamily::Nuclear; }

  // Flatness threshold: p'(t) = 0 for t >= nu. +infinity for the nuclear norm.
  double nu() const noexcept;
  // Concavity level of q = p - lambda|t|.
  double zeta_minus() const noexcept;

  friend bool operator==(const PenaltySpec&, const PenaltySpec&) = default;

 private:
  PenaltyFamily family_;
  double lambda_;
  double b_;
};

double penalty_value(const PenaltySpec& spec, double t);
// Requires t > 0.
double penalty_derivative(const PenaltySpec& spec, double t);

// q(t) = p(t) - lambda|t|, computed by subtraction.
double concave_part_value(const PenaltySpec& spec, double t);
// q'(t) = p'(t) - lambda, t > 0.
double concave_part_derivative(const PenaltySpec& spec, double t);

/// Global minimizer of 0.5 (x - z)^2 + eta * p(|x|).
///
/// Every branch of the spline contributes its stationary point (clipped to the
/// branch) and the knots are added as candidates; the candidate with the
/// smallest objective wins, ties going to the smaller |x|.
double scalar_prox(const PenaltySpec& spec, double z, double eta);

struct ConditionCheck {
  bool passed = false;
  // Largest violation seen (<= 0 when the condition holds everywhere).
  double worst = 0.0;
  // Grid point(s) where `worst` was attained.
  double witness_t = 0.0;
  double witness_t2 = 0.0;
  std::string detail;
};

struct RegularityReport {
  ConditionCheck flatness;   // p'(t) = 0 for t >= nu
  ConditionCheck curvature;  // q'(t') - q'(t) >= -zeta (t' - t)
  ConditionCheck origin;     // q(0) = q'(0+) = 0
  ConditionCheck bounded;    // |q'(t)| <= lambda
  // Empirical concavity: sup over grid pairs of -(q'(t') - q'(t)) / (t' - t).
  double zeta_witness = 0.0;

  bool all_passed() const {
    return flatness.passed && curvature.passed && origin.passed && bounded.passed;
  }
};

/// Numerically checks the four regularity conditions on an increasing grid of
/// positive reals. Throws DomainError on an empty or invalid grid.
RegularityReport check_regularity(const PenaltySpec& spec, std::span<const double> grid);

}  // namespace lowrank
