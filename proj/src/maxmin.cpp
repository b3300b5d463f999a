#include "mmfair/maxmin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "mmfair/random.hpp"
#include "nnls.hpp"

namespace mmfair {

BeamformerSet svd_init(const NetworkTopology& topology, const ChannelSet& channels) {
  BeamformerSet v(topology.num_users());
  for (int i = 0; i < topology.num_users(); ++i) {
    const int k = topology.cell_of(i);
    const int d = topology.streams(i);
    const double scale =
        std::sqrt(topology.power(k) / (static_cast<double>(topology.users_in_cell(k).size()) * d));
    const CMatrix& h = channels(i, k);
    if (h.isZero(0.0)) {
      v[i] = CMatrix::Identity(topology.tx_antennas(k), d) * scale;
      continue;
    }
    Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullV);
    v[i] = svd.matrixV().leftCols(d) * scale;
  }
  return v;
}

BeamformerSet random_init(const NetworkTopology& topology, std::mt19937_64& rng) {
  BeamformerSet v(topology.num_users());
  for (int i = 0; i < topology.num_users(); ++i) {
    const int k = topology.cell_of(i);
    CMatrix g = complex_gaussian(topology.tx_antennas(k), topology.streams(i), 1.0, rng);
    const double target = topology.power(k) / static_cast<double>(topology.users_in_cell(k).size());
    v[i] = g * std::sqrt(target / g.squaredNorm());
  }
  return v;
}

MaxMinIteration::MaxMinIteration(NetworkTopology topology, ChannelSet channels, BeamformerSet init,
                                 MaxMinOptions options)
    : topology_(std::move(topology)), channels_(std::move(channels)), options_(options) {
  if (options_.max_iters < 0 || !(options_.tol > 0.0)) fail(ErrorCode::config, "invalid solver options");
  reset(topology_, channels_, std::move(init));
}

void MaxMinIteration::reset(NetworkTopology topology, ChannelSet channels, BeamformerSet v) {
  channels.validate(topology);
  check_beamformers(topology, v);
  if (!is_feasible(topology, v))
    fail(ErrorCode::feasibility, "initial beamformers violate a power budget");
  const bool same_users = topology.num_users() == topology_.num_users();
  topology_ = std::move(topology);
  channels_ = std::move(channels);
  state_ = TransceiverState{};
  state_.v = std::move(v);
  rates_ = refresh_receivers(topology_, channels_, state_);
  g_ = -state_.lambda;
  if (!same_users || mu_.empty()) mu_.assign(topology_.num_users(), 1.0 / topology_.num_users());
}

IterationRecord MaxMinIteration::snapshot(int iteration) const {
  IterationRecord rec;
  rec.iteration = iteration;
  rec.g = g_;
  rec.g_mid = g_;
  rec.min_rate = state_.lambda;
  rec.rates = rates_;
  rec.powers = bs_powers(topology_, state_.v);
  return rec;
}

IterationRecord MaxMinIteration::step() {
  QvSolver solver(topology_, channels_, state_.u, state_.w, options_.qv);
  std::span<const double> warm;
  if (options_.warm_start_mu) warm = mu_;
  QvSolution sol = solver.solve(&state_.v, warm);
  mu_ = sol.dual.mu;

  state_.v = std::move(sol.v);
  rates_ = refresh_receivers(topology_, channels_, state_);
  g_ = -state_.lambda;
  ++iteration_;

  IterationRecord rec = snapshot(iteration_);
  rec.g_mid = sol.gamma;
  rec.qv_converged = sol.converged;
  rec.qv_barrier = sol.used_barrier;
  rec.qv_gap = sol.dual.gap;
  rec.qv_iterations = sol.iterations;
  return rec;
}

bool stop_reached(const MaxMinOptions& options, const IterationRecord& prev,
                  const IterationRecord& next) {
  if (options.stop == StopRule::min_rate)
    return std::abs(next.min_rate - prev.min_rate) <= options.tol * (1.0 + std::abs(prev.min_rate));
  return std::abs(next.g - prev.g) <= options.tol * (1.0 + std::abs(prev.g));
}

MaxMinResult run_maxmin(const NetworkTopology& topology, const ChannelSet& channels,
                        const BeamformerSet& init, const MaxMinOptions& options) {
  MaxMinIteration run(topology, channels, init, options);
  MaxMinResult out;
  out.trace.records.push_back(run.snapshot(0));
  for (int n = 0; n < options.max_iters; ++n) {
    IterationRecord rec = run.step();
    const bool done = stop_reached(options, out.trace.records.back(), rec);
    out.trace.records.push_back(std::move(rec));
    if (done) {
      out.trace.converged = true;
      break;
    }
  }
  out.state = run.state();
  out.mu = run.mu();
  return out;
}

std::vector<CMatrix> rate_gradient(const NetworkTopology& topology, const ChannelSet& channels,
                                   const BeamformerSet& v, int user) {
  check_beamformers(topology, v);
  const int users = topology.num_users();
  const int n = topology.rx_antennas(user);
  CMatrix j = CMatrix::Zero(n, n);
  for (int m = 0; m < users; ++m) {
    const int bs = topology.cell_of(m);
    if (channels.is_zero(user, bs)) continue;
    const CMatrix hv = channels(user, bs) * v[m];
    j.noalias() += hv * hv.adjoint();
  }
  j.diagonal().array() += topology.noise(user);
  const CMatrix hv_own = channels(user, topology.cell_of(user)) * v[user];
  const CMatrix noise_cov = hermitian_part(j - hv_own * hv_own.adjoint());
  j = hermitian_part(j);
  const CMatrix j_inv = j.llt().solve(CMatrix::Identity(n, n));
  const CMatrix n_inv = noise_cov.llt().solve(CMatrix::Identity(n, n));

  std::vector<CMatrix> grad(users);
  for (int m = 0; m < users; ++m) {
    const int bs = topology.cell_of(m);
    const CMatrix& h = channels(user, bs);
    if (channels.is_zero(user, bs)) {
      grad[m] = CMatrix::Zero(v[m].rows(), v[m].cols());
      continue;
    }
    const CMatrix core = m == user ? j_inv : CMatrix(j_inv - n_inv);
    grad[m] = h.adjoint() * core * h * v[m] / std::numbers::ln2;
  }
  return grad;
}

KktReport kkt_residuals(const NetworkTopology& topology, const ChannelSet& channels,
                        const TransceiverState& state, const KktOptions& options) {
  const int users = topology.num_users();
  const int cells = topology.num_cells();
  check_beamformers(topology, state.v);
  const auto rates = user_rates(topology, channels, state.v);
  const double lambda = *std::min_element(rates.begin(), rates.end());

  std::vector<int> candidates;
  for (int i = 0; i < users; ++i)
    if (rates[i] - lambda <= options.rate_tol) candidates.push_back(i);
  if (candidates.empty()) fail(ErrorCode::solver, "empty active set");

  std::vector<std::vector<CMatrix>> grads;
  grads.reserve(candidates.size());
  for (int i : candidates) grads.push_back(rate_gradient(topology, channels, state.v, i));

  // Real unknowns [mu_candidates, eps_cells] >= 0; rows are the real and
  // imaginary parts of every stationarity entry plus sum(mu) = 1.
  Eigen::Index rows = 0;
  for (int m = 0; m < users; ++m) rows += 2 * state.v[m].size();
  const auto n_mu = static_cast<Eigen::Index>(candidates.size());
  // Extra rows: a small ridge on mu that picks the minimum-norm multipliers
  // when the fit is not unique (e.g. users whose rates do not couple).
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows + 1 + n_mu, n_mu + cells);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows + 1 + n_mu);

  auto scatter = [&](Eigen::Index col, const CMatrix& block, double sign, Eigen::Index row0) {
    Eigen::Index r = row0;
    for (Eigen::Index c = 0; c < block.cols(); ++c)
      for (Eigen::Index q = 0; q < block.rows(); ++q) {
        a(r++, col) += sign * block(q, c).real();
        a(r++, col) += sign * block(q, c).imag();
      }
  };
  double col_scale = 0.0;
  {
    Eigen::Index row0 = 0;
    for (int m = 0; m < users; ++m) {
      for (Eigen::Index c = 0; c < n_mu; ++c) scatter(c, grads[c][m], 1.0, row0);
      scatter(n_mu + topology.cell_of(m), state.v[m], -1.0, row0);
      row0 += 2 * state.v[m].size();
    }
    for (Eigen::Index c = 0; c < n_mu; ++c) col_scale = std::max(col_scale, a.col(c).norm());
  }
  const double weight = 10.0 * std::max(col_scale, 1e-12);
  a.row(rows).head(n_mu).setConstant(weight);
  b(rows) = weight;
  for (Eigen::Index c = 0; c < n_mu; ++c) a(rows + 1 + c, c) = options.mu_ridge * weight;

  // Scale eps columns so NNLS sees comparable magnitudes.
  std::vector<double> eps_scale(cells, 1.0);
  for (int k = 0; k < cells; ++k) {
    const double nrm = a.col(n_mu + k).norm();
    if (nrm > 0.0) {
      eps_scale[k] = col_scale / nrm;
      a.col(n_mu + k) *= eps_scale[k];
    }
  }
  auto fit = [&](const Eigen::VectorXd& x, KktReport& rep) {
    rep.mu.assign(users, 0.0);
    rep.eps.assign(cells, 0.0);
    double mu_sum = x.head(n_mu).sum();
    if (!(mu_sum > 0.0)) mu_sum = 1.0;
    for (Eigen::Index c = 0; c < n_mu; ++c) rep.mu[candidates[c]] = x(c) / mu_sum;
    for (int k = 0; k < cells; ++k) rep.eps[k] = x(n_mu + k) * eps_scale[k] / mu_sum;
    double res2 = 0.0;
    double scale = 0.0;
    for (Eigen::Index c = 0; c < n_mu; ++c) {
      double g2 = 0.0;
      for (int m = 0; m < users; ++m) g2 += grads[c][m].squaredNorm();
      scale += rep.mu[candidates[c]] * std::sqrt(g2);
    }
    for (int m = 0; m < users; ++m) {
      CMatrix r = -rep.eps[topology.cell_of(m)] * state.v[m];
      for (Eigen::Index c = 0; c < n_mu; ++c) r += rep.mu[candidates[c]] * grads[c][m];
      res2 += r.squaredNorm();
    }
    rep.stationarity_residual = std::sqrt(res2) / std::max(scale, 1e-300);
    return scale;
  };

  KktReport rep;
  double scale = fit(detail::nnls(a.topRows(rows + 1), b.head(rows + 1)), rep);
  // When the multipliers are not unique (users whose rates do not couple at
  // this point), prefer the spread-out ridge solution if it fits as well.
  if (n_mu > 1 && options.mu_ridge > 0.0) {
    KktReport spread;
    const double s2 = fit(detail::nnls(a, b), spread);
    if (spread.stationarity_residual <= rep.stationarity_residual + options.mu_ridge_slack) {
      rep = std::move(spread);
      scale = s2;
    }
  }
  for (int i = 0; i < users; ++i)
    if (rep.mu[i] > options.mu_tol) rep.active_set.push_back(i);

  double comp = 0.0;
  for (int i = 0; i < users; ++i) comp = std::max(comp, rep.mu[i] * (rates[i] - lambda));
  double feas = 0.0;
  for (int k = 0; k < cells; ++k) {
    const double p = bs_power(topology, state.v, k);
    const double pk = topology.power(k);
    comp = std::max(comp, rep.eps[k] * std::max(pk - p, 0.0) * std::sqrt(pk) /
                              std::max(scale, 1e-300));
    feas = std::max(feas, std::max(p - pk, 0.0) / pk);
  }
  rep.complementarity_residual = comp;
  rep.feasibility_residual = feas;
  rep.pass = rep.stationarity_residual <= options.kkt_tol &&
             rep.complementarity_residual <= options.kkt_tol &&
             rep.feasibility_residual <= options.kkt_tol;
  return rep;
}

EventOutcome reinitialize_on_event(const NetworkTopology& topology, const ChannelSet& channels,
                                   const TransceiverState& state, const NetworkEvent& event) {
  check_beamformers(topology, state.v);
  if (const auto* change = std::get_if<ChannelChange>(&event)) {
    change->channels.validate(topology);
    EventOutcome out{topology, change->channels, TransceiverState{}, -1};
    out.state.v = state.v;
    refresh_receivers(out.topology, out.channels, out.state);
    return out;
  }

  const auto& join = std::get<UserJoin>(event);
  const int cell = join.cell;
  if (cell < 0 || cell >= topology.num_cells()) fail(ErrorCode::config, "join into unknown cell");
  const double budget = topology.power(cell);
  const double used = bs_power(topology, state.v, cell);
  if (used > budget * (1.0 + kFeasibilityTol))
    fail(ErrorCode::feasibility, "cell exceeds its budget before the join");

  NetworkTopology grown = topology.with_user(cell, join.spec);
  const int new_user =
      grown.user_index(cell, static_cast<int>(grown.users_in_cell(cell).size()) - 1);
  auto old_index = [&](int g) { return g < new_user ? g : g - 1; };

  if (static_cast<int>(join.channels.size()) != grown.num_cells())
    fail(ErrorCode::shape, "joining user needs one channel per BS");
  ChannelSet ch(grown);
  for (int u = 0; u < grown.num_users(); ++u)
    for (int l = 0; l < grown.num_cells(); ++l)
      ch.set(u, l, u == new_user ? join.channels[l] : channels(old_index(u), l));

  const double keep = std::sqrt(2.0 / 3.0);
  const double incumbents = topology.users_in_cell(cell).size();
  BeamformerSet v(grown.num_users());
  for (int u = 0; u < grown.num_users(); ++u) {
    if (u == new_user) continue;
    v[u] = state.v[old_index(u)];
    if (grown.cell_of(u) == cell) v[u] *= keep;
  }
  const double residual = incumbents > 0 ? budget - (2.0 / 3.0) * used : budget;
  if (residual < -budget * kFeasibilityTol)
    fail(ErrorCode::feasibility, "join exceeds the cell budget");
  const int m_tx = grown.tx_antennas(cell);
  if (join.direction.rows() != m_tx || join.direction.cols() != join.spec.streams)
    fail(ErrorCode::shape, "joining user's precoder has the wrong shape");
  const double dn = join.direction.squaredNorm();
  if (!(dn > 0.0)) fail(ErrorCode::domain, "joining user's precoder direction is zero");
  v[new_user] = join.direction * std::sqrt(std::max(residual, 0.0) / dn);

  EventOutcome out{grown, std::move(ch), TransceiverState{}, new_user};
  out.state.v = std::move(v);
  refresh_receivers(out.topology, out.channels, out.state);
  return out;
}

void write_trace_csv(std::ostream& out, const std::string& kind, const SolverTrace& trace) {
  std::size_t n_rates = 0;
  std::size_t n_powers = 0;
  for (const auto& r : trace.records) {
    n_rates = std::max(n_rates, r.rates.size());
    n_powers = std::max(n_powers, r.powers.size());
  }
  out << "kind,iteration,G,min_rate";
  for (std::size_t i = 0; i < n_rates; ++i) out << ",rate_" << i;
  for (std::size_t k = 0; k < n_powers; ++k) out << ",power_" << k;
  out << '\n';
  for (const auto& r : trace.records) {
    out << kind << ',' << r.iteration << ',' << fmt::format("{:.12g},{:.12g}", r.g, r.min_rate);
    for (std::size_t i = 0; i < n_rates; ++i)
      out << ',' << (i < r.rates.size() ? fmt::format("{:.12g}", r.rates[i]) : std::string());
    for (std::size_t k = 0; k < n_powers; ++k)
      out << ',' << (k < r.powers.size() ? fmt::format("{:.12g}", r.powers[k]) : std::string());
    out << '\n';
  }
}

}  // namespace mmfair
