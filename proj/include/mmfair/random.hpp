#pragma once

#include <cstdint>
#include <random>

#include "mmfair/model.hpp"

namespace mmfair {

/// Independent stream for (seed, trial, stream); streams never overlap in
/// practice and do not depend on the order in which trials run.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream = 0);

/// Entries CN(0, variance): real and imaginary parts N(0, variance / 2).
CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, double variance,
                         std::mt19937_64& rng);

}  // namespace mmfair
