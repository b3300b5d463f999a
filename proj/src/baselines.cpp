#include "mmfair/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace mmfair {

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::SumRateWMMSE: return "SumRateWMMSE";
    case BaselineKind::SumMSE: return "SumMSE";
    case BaselineKind::LogSumExp: return "LogSumExp";
    case BaselineKind::GeoMeanWMMSE: return "GeoMeanWMMSE";
  }
  return "unknown";
}

BaselineKind parse_baseline(std::string_view name) {
  if (name == "SumRateWMMSE" || name == "wmmse") return BaselineKind::SumRateWMMSE;
  if (name == "SumMSE" || name == "mmse") return BaselineKind::SumMSE;
  if (name == "LogSumExp" || name == "lse") return BaselineKind::LogSumExp;
  if (name == "GeoMeanWMMSE" || name == "gwmmse") return BaselineKind::GeoMeanWMMSE;
  fail(ErrorCode::config, "unknown baseline '" + std::string(name) + "'");
}

double baseline_objective(BaselineKind kind, const std::vector<double>& rates,
                          const std::vector<double>& mse_traces, double rate_floor) {
  double obj = 0.0;
  switch (kind) {
    case BaselineKind::SumRateWMMSE:
      for (double r : rates) obj -= r;
      break;
    case BaselineKind::SumMSE:
      for (double e : mse_traces) obj += e;
      break;
    case BaselineKind::LogSumExp:
      for (double r : rates) obj += std::exp(-r * std::numbers::ln2);
      break;
    case BaselineKind::GeoMeanWMMSE:
      for (double r : rates) obj -= std::log(std::max(r, rate_floor));
      break;
  }
  return obj;
}

namespace {

struct Refresh {
  std::vector<double> rates;
  std::vector<double> mse;
};

Refresh refresh(BaselineKind kind, const NetworkTopology& topology, const ChannelSet& channels,
                const BaselineOptions& options, TransceiverState& state) {
  const int users = topology.num_users();
  Refresh out;
  out.rates.resize(users);
  out.mse.resize(users);
  state.u.resize(users);
  state.w.resize(users);
  std::vector<CMatrix> e(users);
  for (int i = 0; i < users; ++i) {
    auto rx = mmse_receiver(topology, channels, state.v, i);
    state.u[i] = std::move(rx.u);
    e[i] = std::move(rx.stats.e_mmse);
    out.rates[i] = rx.stats.rate;
    out.mse[i] = e[i].trace().real();
  }
  std::vector<double> scale(users, 1.0);
  if (kind == BaselineKind::LogSumExp) {
    for (int i = 0; i < users; ++i) scale[i] = std::exp(-out.rates[i] * std::numbers::ln2);
    const double s = std::accumulate(scale.begin(), scale.end(), 0.0);
    for (double& x : scale) x *= users / s;
  } else if (kind == BaselineKind::GeoMeanWMMSE) {
    for (int i = 0; i < users; ++i) scale[i] = 1.0 / std::max(out.rates[i], options.rate_floor);
  }
  for (int i = 0; i < users; ++i) {
    const int d = topology.streams(i);
    if (kind == BaselineKind::SumMSE)
      state.w[i] = CMatrix::Identity(d, d);
    else
      state.w[i] = scale[i] * weight_update(e[i]).w;
  }
  state.lambda = *std::min_element(out.rates.begin(), out.rates.end());
  return out;
}

IterationRecord record(BaselineKind kind, const NetworkTopology& topology,
                       const BaselineOptions& options, const TransceiverState& state,
                       const Refresh& r, int iteration) {
  IterationRecord rec;
  rec.iteration = iteration;
  rec.g = baseline_objective(kind, r.rates, r.mse, options.rate_floor);
  rec.g_mid = rec.g;
  rec.min_rate = state.lambda;
  rec.rates = r.rates;
  rec.powers = bs_powers(topology, state.v);
  return rec;
}

}  // namespace

BaselineResult run_baseline(BaselineKind kind, const NetworkTopology& topology,
                            const ChannelSet& channels, const BeamformerSet& init,
                            const BaselineOptions& options) {
  if (options.max_iters < 0 || !(options.tol > 0.0) || !(options.rate_floor > 0.0))
    fail(ErrorCode::config, "invalid baseline options");
  if (kind == BaselineKind::SumMSE || kind == BaselineKind::LogSumExp)
    for (int i = 0; i < topology.num_users(); ++i)
      if (topology.streams(i) != 1)
        fail(ErrorCode::config, std::string(to_string(kind)) + " requires one stream per user");
  channels.validate(topology);
  check_beamformers(topology, init);
  if (!is_feasible(topology, init))
    fail(ErrorCode::feasibility, "initial beamformers violate a power budget");

  const int users = topology.num_users();
  const std::vector<double> uniform(users, 1.0 / users);
  BaselineResult out;
  out.state.v = init;
  Refresh r = refresh(kind, topology, channels, options, out.state);
  out.trace.records.push_back(record(kind, topology, options, out.state, r, 0));
  for (int n = 1; n <= options.max_iters; ++n) {
    out.state.v = weighted_v_update(topology, channels, out.state.u, out.state.w, uniform);
    r = refresh(kind, topology, channels, options, out.state);
    IterationRecord rec = record(kind, topology, options, out.state, r, n);
    const double prev = out.trace.records.back().g;
    const bool done = std::abs(rec.g - prev) <= options.tol * (1.0 + std::abs(prev));
    out.trace.records.push_back(std::move(rec));
    if (done) {
      out.trace.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace mmfair
