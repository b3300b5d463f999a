#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "mmfair/qv_solver.hpp"
#include "oracles.hpp"

using namespace mmfair;
using namespace testing;

namespace {

struct Subproblem {
  NetworkTopology topo;
  ChannelSet ch;
  TransceiverState state;
};

// U and W taken from the MMSE refresh at a random feasible V, as in the
// outer iteration.
Subproblem make_subproblem(int cells, int users, int m, int n, std::uint64_t seed,
                           double noise = 0.3) {
  auto topo = NetworkTopology::uniform(cells, users, m, n, 1, 1.0, noise);
  auto ch = random_channels(topo, seed);
  TransceiverState st;
  st.v = random_beamformers(topo, seed + 1);
  refresh_receivers(topo, ch, st);
  return {std::move(topo), std::move(ch), std::move(st)};
}

double weighted_objective(const Subproblem& s, const BeamformerSet& v,
                          const std::vector<double>& mu) {
  double acc = 0.0;
  for (int i = 0; i < s.topo.num_users(); ++i)
    acc += mu[i] * (s.state.w[i] * mse_matrix(s.topo, s.ch, v, s.state.u[i], i)).trace().real();
  return acc;
}

// Pull every BS back onto its budget if the perturbation left it.
void project(const NetworkTopology& topo, BeamformerSet& v) {
  for (int k = 0; k < topo.num_cells(); ++k) {
    const double p = bs_power(topo, v, k);
    if (p > topo.power(k))
      for (int u : topo.users_in_cell(k)) v[u] *= std::sqrt(topo.power(k) / p);
  }
}

}  // namespace

TEST_CASE("weighted_v_update scalar single user") {
  const auto topo = scalar_topology();
  ChannelSet ch(topo);
  ch.set(0, 0, scalar(1.0));
  std::vector<double> eps;
  const std::vector<double> mu{1.0};
  const auto v = weighted_v_update(topo, ch, {scalar(1.0)}, {scalar(1.0)}, mu, &eps);
  CHECK(std::abs(v[0](0, 0) - Complex(1.0)) < 1e-9);
  CHECK(eps[0] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("zero multiplier gives a zero beamformer") {
  auto s = make_subproblem(2, 2, 2, 2, 101);
  const std::vector<double> mu{0.4, 0.0, 0.35, 0.25};
  const auto v = weighted_v_update(s.topo, s.ch, s.state.u, s.state.w, mu);
  CHECK(v[1].norm() == 0.0);
  CHECK(v[0].norm() > 0.0);
}

TEST_CASE("weighted_v_update minimizes the weighted MSE over feasible perturbations") {
  for (std::uint64_t seed = 110; seed < 116; ++seed) {
    auto s = make_subproblem(2, 1, 2, 2, seed);
    auto rng = make_stream(seed, 0, 9);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    std::vector<double> mu{unif(rng), unif(rng)};
    const double sum = mu[0] + mu[1];
    for (double& x : mu) x /= sum;

    std::vector<double> eps;
    const auto v = weighted_v_update(s.topo, s.ch, s.state.u, s.state.w, mu, &eps);
    CHECK(is_feasible(s.topo, v));
    for (int k = 0; k < s.topo.num_cells(); ++k)
      CHECK(eps[k] * (s.topo.power(k) - bs_power(s.topo, v, k)) <= 1e-6 * s.topo.power(k));

    const double base = weighted_objective(s, v, mu);
    for (double scale : {1e-4, 1e-3, 1e-2, 1e-1, 0.5})
      for (int t = 0; t < 50; ++t) {
        auto vp = v;
        for (auto& b : vp) b += scale * complex_gaussian(b.rows(), b.cols(), 1.0, rng);
        project(s.topo, vp);
        CHECK(weighted_objective(s, vp, mu) >= base - 1e-8);
      }
  }
}

TEST_CASE("solve_qv scalar single user") {
  const auto topo = scalar_topology();
  ChannelSet ch(topo);
  ch.set(0, 0, scalar(1.0));
  const auto sol = solve_qv(topo, ch, {scalar(1.0)}, {scalar(1.0)});
  CHECK(sol.converged);
  CHECK(std::abs(sol.gamma) < 1e-9);
  CHECK(std::abs(std::abs(sol.v[0](0, 0)) - 1.0) < 1e-6);
}

TEST_CASE("two identical decoupled users split the multipliers evenly") {
  const auto topo = NetworkTopology::uniform(2, 1, 1, 1, 1, 1.0, 1.0);
  ChannelSet ch(topo);
  ch.set(0, 0, scalar(1.0));
  ch.set(1, 1, scalar(1.0));
  ch.set(0, 1, scalar(0.0));
  ch.set(1, 0, scalar(0.0));
  const std::vector<CMatrix> u{scalar(0.7), scalar(0.7)}, w{scalar(1.5), scalar(1.5)};
  const auto sol = solve_qv(topo, ch, u, w);
  REQUIRE(sol.dual.mu.size() == 2);
  CHECK(sol.dual.mu[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(sol.dual.mu[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(sol.surrogates[0] == doctest::Approx(sol.surrogates[1]).epsilon(1e-9));
}

TEST_CASE("solve_qv matches the exhaustive scalar grid") {
  for (std::uint64_t seed = 200; seed < 203; ++seed) {
    auto s = make_subproblem(2, 1, 1, 1, seed, 0.1);
    // The stop rule is relative to 1 + |gamma|; tighten it so the absolute
    // gap lands under 1e-6.
    QvOptions opt;
    opt.tol_gap = 1e-7;
    const auto sol = solve_qv(s.topo, s.ch, s.state.u, s.state.w, opt);
    std::complex<double> h[2][2];
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) h[i][j] = s.ch(i, j)(0, 0);
    const double ure[2] = {s.state.u[0](0, 0).real(), s.state.u[1](0, 0).real()};
    const double uim[2] = {s.state.u[0](0, 0).imag(), s.state.u[1](0, 0).imag()};
    const double w[2] = {s.state.w[0](0, 0).real(), s.state.w[1](0, 0).real()};
    const auto grid = oracles::scalar_qv_grid(h, ure, uim, w, 0.1, 1.0, 40, 32);
    CHECK(sol.gamma <= grid.best + 1e-9);
    CHECK(sol.gamma >= grid.best - grid.bound - 1e-9);
    CHECK(sol.dual.gap <= 1e-6);
  }
}

TEST_CASE("dual invariants") {
  for (std::uint64_t seed = 300; seed < 310; ++seed) {
    const int cells = 2 + static_cast<int>(seed % 2);
    auto s = make_subproblem(cells, 2, 3, 2, seed);
    const auto sol = solve_qv(s.topo, s.ch, s.state.u, s.state.w);
    CAPTURE(seed);
    CHECK(sol.gamma >= sol.dual_value - 1e-9);  // weak duality
    CHECK(sol.dual.gap >= -1e-9);
    const double mu_sum = std::accumulate(sol.dual.mu.begin(), sol.dual.mu.end(), 0.0);
    CHECK(std::abs(mu_sum - 1.0) < 1e-12);
    for (double m : sol.dual.mu) CHECK(m >= 0.0);
    for (double e : sol.dual.eps) CHECK(e >= 0.0);
    CHECK(is_feasible(s.topo, sol.v));
    if (sol.converged) {
      for (int k = 0; k < s.topo.num_cells(); ++k)
        CHECK(sol.dual.eps[k] * (s.topo.power(k) - bs_power(s.topo, sol.v, k)) <=
              1e-6 * s.topo.power(k));
    }
    const auto f = QvProblem(s.topo, s.ch, s.state.u, s.state.w).surrogates(sol.v);
    CHECK(*std::max_element(f.begin(), f.end()) == doctest::Approx(sol.gamma).epsilon(1e-12));
  }
}

TEST_CASE("the returned V is never worse than the incoming V") {
  for (std::uint64_t seed = 400; seed < 410; ++seed) {
    auto s = make_subproblem(2, 2, 2, 2, seed);
    const QvProblem prob(s.topo, s.ch, s.state.u, s.state.w);
    const auto f_in = prob.surrogates(s.state.v);
    const double g_in = *std::max_element(f_in.begin(), f_in.end());
    QvOptions loose;
    loose.max_outer = 3;  // a truncated solve still has to respect the incoming point
    loose.barrier_fallback = false;
    for (const auto& opt : {QvOptions{}, loose}) {
      const auto sol = solve_qv(s.topo, s.ch, s.state.u, s.state.w, opt, &s.state.v);
      CHECK(sol.gamma <= g_in + 1e-9);
    }
  }
}

TEST_CASE("invalid options are rejected") {
  auto s = make_subproblem(1, 1, 2, 2, 5);
  QvOptions bad;
  bad.tol_gap = 0.0;
  CHECK_THROWS_AS(solve_qv(s.topo, s.ch, s.state.u, s.state.w, bad), Error);
}
