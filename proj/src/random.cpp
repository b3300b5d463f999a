#include "mmfair/random.hpp"

#include <cmath>

namespace mmfair {

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6d6d6661u};
  return std::mt19937_64(seq);
}

CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, double variance,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
  CMatrix out(rows, cols);
  // column-major fill order is part of the reproducibility contract
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      out(r, c) = Complex(re, im);
    }
  return out;
}

}  // namespace mmfair
