#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace lowrank {

// All sampling goes through this generator. Trial substreams are seeded with
// derive_seed(base_seed, {indices...}), a splitmix64 fold over the path.
using Rng = std::mt19937_64;

inline constexpr std::string_view kRngIdentifier =
    "mt19937_64; substream seed = splitmix64 fold of (base_seed, indices...); "
    "normals via std::normal_distribution (libstdc++)";

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept;

Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                double stddev = 1.0);
Eigen::VectorXd gaussian_vector(Rng& rng, Eigen::Index size, double stddev = 1.0);

}  // namespace lowrank
