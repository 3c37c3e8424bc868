#include "lowrank/penalty.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "lowrank/errors.hpp"

namespace lowrank {

namespace {

constexpr double kRegularityTol = 1e-9;
// Stand-in for t -> 0+ when evaluating q'(0+).
constexpr double kOriginProbe = 1e-12;

}  // namespace

std::string_view to_string(PenaltyFamily family) {
  switch (family) {
    case PenaltyFamily::Nuclear: return "nuclear";
    case PenaltyFamily::Scad: return "scad";
    case PenaltyFamily::Mcp: return "mcp";
  }
  return "unknown";
}

PenaltyFamily parse_penalty_family(std::string_view name) {
  if (name == "nuclear") return PenaltyFamily::Nuclear;
  if (name == "scad") return PenaltyFamily::Scad;
  if (name == "mcp") return PenaltyFamily::Mcp;
  throw DomainError("unknown penalty family '" + std::string(name) +
                    "' (expected nuclear|scad|mcp)");
}

PenaltySpec::PenaltySpec(PenaltyFamily family, double lambda, double b)
    : family_(family), lambda_(lambda), b_(family == PenaltyFamily::Nuclear ? 0.0 : b) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("penalty lambda must be a positive finite number");
  }
  if (family == PenaltyFamily::Scad && !(b > 2.0 && std::isfinite(b))) {
    throw DomainError("SCAD requires b > 2");
  }
  if (family == PenaltyFamily::Mcp && !(b > 1.0 && std::isfinite(b))) {
    throw DomainError("MCP requires b > 1");
  }
}

double PenaltySpec::nu() const noexcept {
  if (family_ == PenaltyFamily::Nuclear) return std::numeric_limits<double>::infinity();
  return b_ * lambda_;
}

double PenaltySpec::zeta_minus() const noexcept {
  switch (family_) {
    case PenaltyFamily::Nuclear: return 0.0;
    case PenaltyFamily::Scad: return 1.0 / (b_ - 1.0);
    case PenaltyFamily::Mcp: return 1.0 / b_;
  }
  return 0.0;
}

double penalty_value(const PenaltySpec& spec, double t) {
  const double a = std::abs(t);
  const double lam = spec.lambda();
  const double b = spec.b();
  switch (spec.family()) {
    case PenaltyFamily::Nuclear:
      return lam * a;
    case PenaltyFamily::Scad:
      if (a <= lam) return lam * a;
      if (a <= b * lam) return -(a * a - 2.0 * b * lam * a + lam * lam) / (2.0 * (b - 1.0));
      return (b + 1.0) * lam * lam / 2.0;
    case PenaltyFamily::Mcp:
      if (a <= b * lam) return lam * a - a * a / (2.0 * b);
      return b * lam * lam / 2.0;
  }
  return 0.0;
}

double penalty_derivative(const PenaltySpec& spec, double t) {
  if (!(t > 0.0)) throw DomainError("penalty_derivative requires t > 0");
  const double lam = spec.lambda();
  const double b = spec.b();
  switch (spec.family()) {
    case PenaltyFamily::Nuclear:
      return lam;
    case PenaltyFamily::Scad:
      if (t <= lam) return lam;
      if (t <= b * lam) return (b * lam - t) / (b - 1.0);
      return 0.0;
    case PenaltyFamily::Mcp:
      if (t <= b * lam) return lam - t / b;
      return 0.0;
  }
  return 0.0;
}

double concave_part_value(const PenaltySpec& spec, double t) {
  return penalty_value(spec, t) - spec.lambda() * std::abs(t);
}

double concave_part_derivative(const PenaltySpec& spec, double t) {
  return penalty_derivative(spec, t) - spec.lambda();
}

double scalar_prox(const PenaltySpec& spec, double z, double eta) {
  if (!std::isfinite(z)) throw DomainError("scalar_prox requires a finite argument");
  if (!(eta > 0.0)) throw DomainError("scalar_prox requires eta > 0");

  const double a = std::abs(z);
  const double lam = spec.lambda();
  const double b = spec.b();
  auto clip = [](double x, double lo, double hi) { return std::clamp(x, lo, hi); };

  // Candidates on [0, inf) for the prox of |z|; the sign is restored at the end.
  std::array<double, 8> cand{};
  std::size_t count = 0;
  auto push = [&](double x) { cand[count++] = std::max(0.0, x); };
  push(0.0);
  push(a);
  switch (spec.family()) {
    case PenaltyFamily::Nuclear:
      push(a - eta * lam);
      break;
    case PenaltyFamily::Scad: {
      push(lam);
      push(b * lam);
      push(clip(a - eta * lam, 0.0, lam));
      const double denom = b - 1.0 - eta;
      if (denom != 0.0) push(clip((a * (b - 1.0) - eta * b * lam) / denom, lam, b * lam));
      push(std::max(a, b * lam));
      break;
    }
    case PenaltyFamily::Mcp: {
      push(b * lam);
      const double denom = 1.0 - eta / b;
      if (denom != 0.0) push(clip((a - eta * lam) / denom, 0.0, b * lam));
      push(std::max(a, b * lam));
      break;
    }
  }

  std::sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(count));
  double best_x = cand[0];
  double best_f = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) {
    const double x = cand[i];
    const double f = 0.5 * (x - a) * (x - a) + eta * penalty_value(spec, x);
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  return z < 0.0 ? -best_x : best_x;
}

RegularityReport check_regularity(const PenaltySpec& spec, std::span<const double> grid) {
  if (grid.empty()) throw DomainError("check_regularity requires a non-empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw DomainError("check_regularity requires an increasing grid of positive reals");
    }
  }

  RegularityReport report;
  const double lam = spec.lambda();
  const double zeta = spec.zeta_minus();
  const double nu = spec.nu();

  // (i) flatness beyond nu
  {
    ConditionCheck& c = report.flatness;
    if (!std::isfinite(nu)) {
      c.passed = false;
      c.worst = lam;
      c.witness_t = grid.back();
      c.detail = "no finite flatness threshold: p'(t) = lambda for all t > 0";
    } else {
      c.worst = std::abs(penalty_derivative(spec, nu));
      c.witness_t = nu;
      for (double t : grid) {
        if (t < nu) continue;
        const double d = std::abs(penalty_derivative(spec, t));
        if (d > c.worst) {
          c.worst = d;
          c.witness_t = t;
        }
      }
      c.passed = c.worst <= kRegularityTol;
    }
  }

  std::vector<double> dq(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) dq[i] = concave_part_derivative(spec, grid[i]);

  // (ii) one-sided Lipschitz bound on q', over every ordered grid pair
  {
    ConditionCheck& c = report.curvature;
    c.worst = -std::numeric_limits<double>::infinity();
    double sup_slope = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      for (std::size_t j = i + 1; j < grid.size(); ++j) {
        const double dt = grid[j] - grid[i];
        const double diff = dq[j] - dq[i];
        const double violation = -(diff + zeta * dt);
        if (violation > c.worst) {
          c.worst = violation;
          c.witness_t = grid[i];
          c.witness_t2 = grid[j];
        }
        sup_slope = std::max(sup_slope, -diff / dt);
      }
    }
    if (grid.size() == 1) c.worst = 0.0;
    c.passed = c.worst <= kRegularityTol;
    report.zeta_witness = sup_slope;
  }

  // (iii) q and q' vanish at the origin
  {
    ConditionCheck& c = report.origin;
    const double q0 = std::abs(concave_part_value(spec, 0.0));
    const double dq0 = std::abs(concave_part_derivative(spec, kOriginProbe));
    c.worst = std::max(q0, dq0);
    c.witness_t = 0.0;
    c.passed = c.worst <= kRegularityTol;
  }

  // (iv) |q'| bounded by lambda
  {
    ConditionCheck& c = report.bounded;
    c.worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double excess = std::abs(dq[i]) - lam;
      if (excess > c.worst) {
        c.worst = excess;
        c.witness_t = grid[i];
      }
    }
    c.passed = c.worst <= kRegularityTol;
  }

  auto describe = [](ConditionCheck& c) {
    if (!c.detail.empty()) return;
    std::ostringstream os;
    os << (c.passed ? "holds" : "violated") << "; worst " << c.worst << " at t=" << c.witness_t;
    c.detail = os.str();
  };
  describe(report.flatness);
  describe(report.curvature);
  describe(report.origin);
  describe(report.bounded);
  return report;
}

}  // namespace lowrank
