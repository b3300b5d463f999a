#pragma once

#include <cmath>
#include <cstdint>

#include "mmfair/model.hpp"
#include "mmfair/random.hpp"

namespace testing {

using namespace mmfair;

inline NetworkTopology scalar_topology(double noise = 1.0, double power = 1.0) {
  return NetworkTopology::uniform(1, 1, 1, 1, 1, power, noise);
}

inline CMatrix scalar(Complex x) {
  CMatrix m(1, 1);
  m(0, 0) = x;
  return m;
}

inline ChannelSet random_channels(const NetworkTopology& topo, std::uint64_t seed,
                                  std::uint64_t trial = 0) {
  auto rng = make_stream(seed, trial);
  ChannelSet ch(topo);
  for (int u = 0; u < topo.num_users(); ++u)
    for (int l = 0; l < topo.num_cells(); ++l)
      ch.set(u, l, complex_gaussian(topo.rx_antennas(u), topo.tx_antennas(l), 1.0, rng));
  return ch;
}

/// Isotropic directions scaled so every BS spends `fill` of its budget.
inline BeamformerSet random_beamformers(const NetworkTopology& topo, std::uint64_t seed,
                                        double fill = 1.0) {
  auto rng = make_stream(seed, 0, 7);
  BeamformerSet v(topo.num_users());
  for (int u = 0; u < topo.num_users(); ++u)
    v[u] = complex_gaussian(topo.tx_antennas(topo.cell_of(u)), topo.streams(u), 1.0, rng);
  for (int k = 0; k < topo.num_cells(); ++k) {
    double p = 0.0;
    for (int u : topo.users_in_cell(k)) p += v[u].squaredNorm();
    const double s = std::sqrt(fill * topo.power(k) / p);
    for (int u : topo.users_in_cell(k)) v[u] *= s;
  }
  return v;
}

inline double snr_noise(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

}  // namespace testing
