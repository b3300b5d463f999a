#include "mmfair/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include <json.hpp>
#include <toml.hpp>

#include "mmfair/baselines.hpp"
#include "mmfair/random.hpp"
#include "parallel.hpp"

#ifndef MMFAIR_VERSION
#define MMFAIR_VERSION "0.0.0"
#endif

namespace mmfair {

const char* library_version() { return MMFAIR_VERSION; }

namespace {

const std::set<std::string> kAlgorithms{"maxmin", "wmmse", "mmse", "lse", "gwmmse"};

std::string num(double v) { return fmt::format("{:.12g}", v); }

template <class T>
T get_or(const toml::table& t, std::string_view key, T fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if constexpr (std::is_same_v<T, double>) {
    if (auto v = n->value<double>()) return *v;
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = n->value<std::string>()) return *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (auto v = n->value<bool>()) return *v;
  } else {
    if (n->is_integer()) return static_cast<T>(n->as_integer()->get());
  }
  fail(ErrorCode::config, fmt::format("key '{}' has the wrong type", key));
}

void check_keys(const toml::table& t, const std::string& where, std::set<std::string> allowed) {
  for (const auto& [k, v] : t)
    if (!allowed.count(std::string(k.str())))
      fail(ErrorCode::config, fmt::format("unknown key '{}' in {}", k.str(), where));
}

MaxMinOptions maxmin_options(const ScenarioConfig& c) {
  MaxMinOptions o;
  o.max_iters = c.max_iters;
  o.tol = c.tol;
  o.qv.tol_gap = c.qv_tol;
  return o;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

CMatrix leading_right_singular(const CMatrix& h, int d) {
  Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullV);
  return svd.matrixV().leftCols(d);
}

struct TrialOut {
  std::vector<RateRow> rates;
  std::vector<TrialState> states;
  std::vector<DynamicRow> trace;
  std::vector<KktRow> kkt;
  // (algorithm, snr index) -> min rate, sum rate, iterations, converged
  std::vector<std::array<double, 4>> stats;
};

template <class Fn>
std::vector<TrialOut> for_trials(const ScenarioConfig& c, Fn&& fn) {
  std::vector<TrialOut> out(c.trials);
  detail::parallel_chunks(c.trials, c.trials, c.threads,
                          [&](int, std::int64_t b, std::int64_t e) {
                            for (std::int64_t t = b; t < e; ++t) fn(static_cast<int>(t), out[t]);
                          });
  return out;
}

void add_rates(TrialOut& out, const std::string& algo, double snr, int trial,
               const NetworkTopology& topo, const std::vector<double>& rates) {
  for (int u = 0; u < topo.num_users(); ++u)
    out.rates.push_back({algo, snr, trial, u, topo.cell_of(u), rates[u]});
}

ExperimentResult sweep(const ScenarioConfig& c, const std::vector<double>& snrs, ExperimentKind kind) {
  validate(c);
  const int na = static_cast<int>(c.algorithms.size());
  const int ns = static_cast<int>(snrs.size());
  auto trials = for_trials(c, [&](int t, TrialOut& out) {
    const ChannelSet ch = generate_channels(c, t);
    out.stats.resize(static_cast<std::size_t>(na) * ns);
    for (int a = 0; a < na; ++a)
      for (int s = 0; s < ns; ++s) {
        const NetworkTopology topo = scenario_topology(c, snrs[s]);
        const BeamformerSet init = initial_beamformers(c, topo, ch, t);
        const AlgorithmRun run = run_algorithm(c.algorithms[a], c, topo, ch, init);
        add_rates(out, c.algorithms[a], snrs[s], t, topo, run.rates);
        out.states.push_back({c.algorithms[a], snrs[s], t, run.state.v});
        out.stats[a * ns + s] = {*std::min_element(run.rates.begin(), run.rates.end()),
                                 sum(run.rates),
                                 static_cast<double>(run.trace.records.size() - 1),
                                 run.trace.converged ? 1.0 : 0.0};
      }
  });

  ExperimentResult res;
  res.kind = kind;
  for (int a = 0; a < na; ++a)
    for (int s = 0; s < ns; ++s) {
      const std::string& algo = c.algorithms[a];
      std::vector<double> pooled;
      SummaryRow row{algo, snrs[s], c.trials};
      for (int t = 0; t < c.trials; ++t) {
        const TrialOut& tr = trials[t];
        for (const RateRow& r : tr.rates)
          if (r.algorithm == algo && r.snr_db == snrs[s]) {
            res.rates.push_back(r);
            pooled.push_back(r.rate);
          }
        for (const TrialState& st : tr.states)
          if (st.algorithm == algo && st.snr_db == snrs[s]) res.states.push_back(st);
        const auto& st = tr.stats[a * ns + s];
        row.mean_min_rate += st[0] / c.trials;
        row.mean_sum_rate += st[1] / c.trials;
        row.mean_iterations += st[2] / c.trials;
        row.converged += static_cast<int>(st[3]);
      }
      row.p5_user_rate = percentile(pooled, 5.0);
      res.summary.push_back(row);
      std::sort(pooled.begin(), pooled.end());
      for (std::size_t i = 0; i < pooled.size(); ++i)
        res.cdf.push_back({algo, snrs[s], pooled[i], double(i + 1) / double(pooled.size())});
    }
  return res;
}

ChannelSet faded(const ScenarioConfig& c, const NetworkTopology& topo, const ChannelSet& ch,
                 double variance, std::mt19937_64& rng) {
  ChannelSet out(topo);
  for (int u = 0; u < topo.num_users(); ++u)
    for (int l = 0; l < topo.num_cells(); ++l) {
      const CMatrix& h = ch(u, l);
      if (c.fade == FadeModel::additive)
        out.set(u, l, h + complex_gaussian(h.rows(), h.cols(), variance, rng));
      else
        out.set(u, l, std::sqrt(1.0 - variance) * h +
                          std::sqrt(variance) * complex_gaussian(h.rows(), h.cols(), 1.0, rng));
    }
  return out;
}

NetworkEvent make_event(const ScenarioConfig& c, const EventSpec& e, const MaxMinIteration& it,
                        std::mt19937_64& rng) {
  const NetworkTopology& topo = it.topology();
  if (e.type == EventSpec::channel_change)
    return ChannelChange{faded(c, topo, it.channels(), e.variance, rng)};
  if (e.cell < 0 || e.cell >= topo.num_cells())
    fail(ErrorCode::config, fmt::format("user_join into unknown cell {}", e.cell));
  UserJoin join;
  join.cell = e.cell;
  join.spec = UserSpec{c.rx_antennas, c.streams, topo.noise(0)};
  for (int l = 0; l < topo.num_cells(); ++l)
    join.channels.push_back(complex_gaussian(c.rx_antennas, topo.tx_antennas(l), 1.0, rng));
  join.direction = leading_right_singular(join.channels[e.cell], c.streams);
  return join;
}

std::string event_name(EventSpec::Type t) {
  return t == EventSpec::user_join ? "user_join" : "channel_change";
}

}  // namespace

ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "cdf" || s == "rate_cdf") return ExperimentKind::rate_cdf;
  if (s == "snr" || s == "minrate_vs_snr") return ExperimentKind::minrate_vs_snr;
  if (s == "dynamic") return ExperimentKind::dynamic;
  if (s == "kkt") return ExperimentKind::kkt;
  fail(ErrorCode::config, "unknown experiment kind '" + s + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::rate_cdf: return "cdf";
    case ExperimentKind::minrate_vs_snr: return "snr";
    case ExperimentKind::dynamic: return "dynamic";
    case ExperimentKind::kkt: return "kkt";
  }
  return "unknown";
}

std::string to_string(FadeModel model) {
  return model == FadeModel::additive ? "additive" : "convex";
}

void validate(const ScenarioConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::config, what);
  };
  need(c.cells >= 1 && c.users_per_cell >= 1, "cells and users_per_cell must be >= 1");
  need(c.tx_antennas >= 1 && c.rx_antennas >= 1, "antenna counts must be >= 1");
  need(c.streams >= 1 && c.streams <= std::min(c.tx_antennas, c.rx_antennas),
       "streams must lie in 1..min(M, N)");
  need(c.power > 0.0, "power must be positive");
  need(c.trials >= 1, "trials must be >= 1");
  need(!c.snr_db.empty(), "snr_db must be non-empty");
  for (double s : c.snr_db) need(std::isfinite(s), "snr_db entries must be finite");
  need(!c.algorithms.empty(), "algorithms must be non-empty");
  for (const auto& a : c.algorithms) {
    need(kAlgorithms.count(a) > 0,
         "unknown algorithm '" + a + "' (expected maxmin, wmmse, mmse, lse or gwmmse)");
    if ((a == "mmse" || a == "lse") && c.streams != 1)
      fail(ErrorCode::config, a + " needs streams = 1");
  }
  need(c.max_iters >= 1, "max_iters must be >= 1");
  need(c.tol > 0.0 && c.qv_tol > 0.0, "tolerances must be positive");
  need(c.iterations >= 0, "iterations must be >= 0");
  need(c.kkt_tol > 0.0 && c.rate_tol > 0.0, "kkt tolerances must be positive");
  for (const auto& e : c.events) {
    need(e.iteration >= 0, "event iteration must be >= 0");
    if (c.kind == ExperimentKind::dynamic)
      need(e.iteration < c.iterations, "event iteration must be below the dynamic horizon");
    if (e.type == EventSpec::channel_change) {
      need(e.variance > 0.0, "channel_change variance must be positive");
      if (c.fade == FadeModel::convex) need(e.variance <= 1.0, "convex fade needs variance <= 1");
    }
  }
  need(!c.output.empty(), "output must be non-empty");
}

ScenarioConfig parse_config(const std::string& text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    fail(ErrorCode::config, fmt::format("config parse error at line {}: {}",
                                        e.source().begin.line, e.description()));
  }
  check_keys(root, "config", {"topology", "experiment", "events"});
  ScenarioConfig c;
  if (const toml::table* t = root["topology"].as_table()) {
    check_keys(*t, "[topology]",
               {"cells", "users_per_cell", "tx_antennas", "rx_antennas", "streams", "power"});
    c.cells = get_or(*t, "cells", c.cells);
    c.users_per_cell = get_or(*t, "users_per_cell", c.users_per_cell);
    c.tx_antennas = get_or(*t, "tx_antennas", c.tx_antennas);
    c.rx_antennas = get_or(*t, "rx_antennas", c.rx_antennas);
    c.streams = get_or(*t, "streams", c.streams);
    c.power = get_or(*t, "power", c.power);
  }
  if (const toml::table* t = root["experiment"].as_table()) {
    check_keys(*t, "[experiment]",
               {"kind", "snr_db", "trials", "seed", "algorithms", "max_iters", "tol", "qv_tol",
                "init", "threads", "iterations", "fade_model", "kkt_tol", "rate_tol", "output"});
    c.kind = parse_experiment_kind(get_or<std::string>(*t, "kind", "cdf"));
    if (const toml::node* n = t->get("snr_db")) {
      c.snr_db.clear();
      if (const toml::array* arr = n->as_array()) {
        for (const auto& v : *arr) {
          auto d = v.value<double>();
          if (!d) fail(ErrorCode::config, "snr_db entries must be numbers");
          c.snr_db.push_back(*d);
        }
      } else if (auto d = n->value<double>()) {
        c.snr_db.push_back(*d);
      } else {
        fail(ErrorCode::config, "snr_db must be a number or an array");
      }
    }
    c.trials = get_or(*t, "trials", c.trials);
    const auto seed = get_or<std::int64_t>(*t, "seed", static_cast<std::int64_t>(c.seed));
    if (seed < 0) fail(ErrorCode::config, "seed must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    if (const toml::node* n = t->get("algorithms")) {
      const toml::array* arr = n->as_array();
      if (!arr) fail(ErrorCode::config, "algorithms must be an array of strings");
      c.algorithms.clear();
      for (const auto& v : *arr) {
        auto s = v.value<std::string>();
        if (!s) fail(ErrorCode::config, "algorithms must be an array of strings");
        c.algorithms.push_back(*s);
      }
    }
    c.max_iters = get_or(*t, "max_iters", c.max_iters);
    c.tol = get_or(*t, "tol", c.tol);
    c.qv_tol = get_or(*t, "qv_tol", c.qv_tol);
    const std::string init = get_or<std::string>(*t, "init", "svd");
    if (init == "svd")
      c.init = InitKind::svd;
    else if (init == "random")
      c.init = InitKind::random;
    else
      fail(ErrorCode::config, "init must be svd or random");
    c.threads = get_or(*t, "threads", c.threads);
    c.iterations = get_or(*t, "iterations", c.iterations);
    const std::string fade = get_or<std::string>(*t, "fade_model", "additive");
    if (fade == "additive")
      c.fade = FadeModel::additive;
    else if (fade == "convex")
      c.fade = FadeModel::convex;
    else
      fail(ErrorCode::config, "fade_model must be additive or convex");
    c.kkt_tol = get_or(*t, "kkt_tol", c.kkt_tol);
    c.rate_tol = get_or(*t, "rate_tol", c.rate_tol);
    c.output = get_or(*t, "output", c.output);
  }
  if (const toml::node* n = root.get("events")) {
    const toml::array* arr = n->as_array();
    if (!arr) fail(ErrorCode::config, "events must be an array of tables");
    for (const auto& v : *arr) {
      const toml::table* t = v.as_table();
      if (!t) fail(ErrorCode::config, "events must be an array of tables");
      check_keys(*t, "[[events]]", {"iteration", "type", "cell", "variance"});
      EventSpec e;
      const std::string type = get_or<std::string>(*t, "type", "");
      if (type == "user_join")
        e.type = EventSpec::user_join;
      else if (type == "channel_change")
        e.type = EventSpec::channel_change;
      else
        fail(ErrorCode::config, "event type must be user_join or channel_change");
      if (!t->get("iteration")) fail(ErrorCode::config, "event needs an iteration");
      e.iteration = get_or(*t, "iteration", 0);
      e.cell = get_or(*t, "cell", 0);
      e.variance = get_or(*t, "variance", 0.1);
      c.events.push_back(e);
    }
  }
  validate(c);
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

double noise_for_snr(double power, double snr_db) { return power / std::pow(10.0, snr_db / 10.0); }

NetworkTopology scenario_topology(const ScenarioConfig& c, double snr_db) {
  return NetworkTopology::uniform(c.cells, c.users_per_cell, c.tx_antennas, c.rx_antennas,
                                  c.streams, c.power, noise_for_snr(c.power, snr_db));
}

ChannelSet generate_channels(const ScenarioConfig& c, int trial) {
  if (trial < 0) fail(ErrorCode::config, "trial index must be >= 0");
  const NetworkTopology topo = scenario_topology(c, 0.0);
  auto rng = make_stream(c.seed, static_cast<std::uint64_t>(trial), kStreamChannels);
  ChannelSet ch(topo);
  for (int u = 0; u < topo.num_users(); ++u)
    for (int l = 0; l < topo.num_cells(); ++l)
      ch.set(u, l, complex_gaussian(c.rx_antennas, c.tx_antennas, 1.0, rng));
  return ch;
}

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * double(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

BeamformerSet initial_beamformers(const ScenarioConfig& c, const NetworkTopology& topo,
                                  const ChannelSet& ch, int trial) {
  if (c.init == InitKind::svd) return svd_init(topo, ch);
  auto rng = make_stream(c.seed, static_cast<std::uint64_t>(trial), kStreamInit);
  return random_init(topo, rng);
}

AlgorithmRun run_algorithm(const std::string& label, const ScenarioConfig& c,
                           const NetworkTopology& topo, const ChannelSet& ch,
                           const BeamformerSet& init) {
  AlgorithmRun out;
  if (label == "maxmin") {
    MaxMinResult r = run_maxmin(topo, ch, init, maxmin_options(c));
    out.state = std::move(r.state);
    out.trace = std::move(r.trace);
  } else {
    BaselineOptions o;
    o.max_iters = c.max_iters;
    o.tol = c.tol;
    BaselineResult r = run_baseline(parse_baseline(label), topo, ch, init, o);
    out.state = std::move(r.state);
    out.trace = std::move(r.trace);
  }
  out.rates = user_rates(topo, ch, out.state.v);
  return out;
}

ExperimentResult run_rate_cdf(const ScenarioConfig& c) {
  return sweep(c, {c.snr_db.front()}, ExperimentKind::rate_cdf);
}

ExperimentResult run_minrate_vs_snr(const ScenarioConfig& c) {
  return sweep(c, c.snr_db, ExperimentKind::minrate_vs_snr);
}

ExperimentResult run_dynamic(const ScenarioConfig& c) {
  validate(c);
  const double snr = c.snr_db.front();
  std::vector<EventSpec> events = c.events;
  std::stable_sort(events.begin(), events.end(),
                   [](const EventSpec& a, const EventSpec& b) { return a.iteration < b.iteration; });
  auto trials = for_trials(c, [&](int t, TrialOut& out) {
    const NetworkTopology topo = scenario_topology(c, snr);
    const ChannelSet ch = generate_channels(c, t);
    MaxMinIteration it(topo, ch, initial_beamformers(c, topo, ch, t), maxmin_options(c));
    auto rng = make_stream(c.seed, static_cast<std::uint64_t>(t), kStreamEvents);
    auto push = [&](const IterationRecord& r, const std::string& ev) {
      out.trace.push_back({t, r.iteration, ev, it.topology().num_users(), r.g, r.min_rate});
    };
    std::size_t next = 0;
    for (int n = 0; n <= c.iterations; ++n) {
      push(n == 0 ? it.snapshot(0) : it.step(), "");
      for (; next < events.size() && events[next].iteration == n; ++next) {
        const EventOutcome o =
            reinitialize_on_event(it.topology(), it.channels(), it.state(),
                                  make_event(c, events[next], it, rng));
        it.reset(o.topology, o.channels, o.state.v);
        push(it.snapshot(n), event_name(events[next].type));
      }
    }
    add_rates(out, "maxmin", snr, t, it.topology(),
              user_rates(it.topology(), it.channels(), it.state().v));
    out.states.push_back({"maxmin", snr, t, it.state().v});
  });
  ExperimentResult res;
  res.kind = ExperimentKind::dynamic;
  for (auto& tr : trials) {
    res.trace.insert(res.trace.end(), tr.trace.begin(), tr.trace.end());
    res.rates.insert(res.rates.end(), tr.rates.begin(), tr.rates.end());
    res.states.insert(res.states.end(), tr.states.begin(), tr.states.end());
  }
  return res;
}

ExperimentResult run_kkt(const ScenarioConfig& c) {
  validate(c);
  KktOptions ko;
  ko.kkt_tol = c.kkt_tol;
  ko.rate_tol = c.rate_tol;
  auto trials = for_trials(c, [&](int t, TrialOut& out) {
    const ChannelSet ch = generate_channels(c, t);
    for (double snr : c.snr_db) {
      const NetworkTopology topo = scenario_topology(c, snr);
      MaxMinResult r = run_maxmin(topo, ch, initial_beamformers(c, topo, ch, t), maxmin_options(c));
      const KktReport k = kkt_residuals(topo, ch, r.state, ko);
      out.kkt.push_back({snr, t, static_cast<int>(r.trace.records.size()) - 1, r.trace.converged,
                         r.state.lambda, k.stationarity_residual, k.complementarity_residual,
                         k.feasibility_residual, static_cast<int>(k.active_set.size()), k.pass});
      add_rates(out, "maxmin", snr, t, topo, user_rates(topo, ch, r.state.v));
      out.states.push_back({"maxmin", snr, t, r.state.v});
    }
  });
  ExperimentResult res;
  res.kind = ExperimentKind::kkt;
  for (auto& tr : trials) {
    res.kkt.insert(res.kkt.end(), tr.kkt.begin(), tr.kkt.end());
    res.rates.insert(res.rates.end(), tr.rates.begin(), tr.rates.end());
    res.states.insert(res.states.end(), tr.states.begin(), tr.states.end());
  }
  return res;
}

ExperimentResult run_experiment(const ScenarioConfig& c) {
  switch (c.kind) {
    case ExperimentKind::rate_cdf: return run_rate_cdf(c);
    case ExperimentKind::minrate_vs_snr: return run_minrate_vs_snr(c);
    case ExperimentKind::dynamic: return run_dynamic(c);
    case ExperimentKind::kkt: return run_kkt(c);
  }
  fail(ErrorCode::config, "unknown experiment kind");
}

void write_rates_csv(std::ostream& out, const ExperimentResult& r) {
  out << "algorithm,snr_db,trial,user,cell,rate\n";
  for (const auto& x : r.rates)
    out << x.algorithm << ',' << num(x.snr_db) << ',' << x.trial << ',' << x.user << ',' << x.cell
        << ',' << num(x.rate) << '\n';
}

void write_summary_csv(std::ostream& out, const ExperimentResult& r) {
  out << "algorithm,snr_db,trials,mean_min_rate,mean_sum_rate,p5_user_rate,mean_iterations,"
         "converged\n";
  for (const auto& x : r.summary)
    out << x.algorithm << ',' << num(x.snr_db) << ',' << x.trials << ',' << num(x.mean_min_rate)
        << ',' << num(x.mean_sum_rate) << ',' << num(x.p5_user_rate) << ','
        << num(x.mean_iterations) << ',' << x.converged << '\n';
}

void write_cdf_csv(std::ostream& out, const ExperimentResult& r) {
  out << "algorithm,snr_db,rate,cdf\n";
  for (const auto& x : r.cdf)
    out << x.algorithm << ',' << num(x.snr_db) << ',' << num(x.rate) << ',' << num(x.cdf) << '\n';
}

void write_dynamic_csv(std::ostream& out, const ExperimentResult& r) {
  out << "trial,iteration,event,users,G,min_rate\n";
  for (const auto& x : r.trace)
    out << x.trial << ',' << x.iteration << ',' << x.event << ',' << x.users << ',' << num(x.g)
        << ',' << num(x.min_rate) << '\n';
}

void write_kkt_csv(std::ostream& out, const ExperimentResult& r) {
  out << "snr_db,trial,iterations,converged,min_rate,stationarity,complementarity,feasibility,"
         "active,pass\n";
  for (const auto& x : r.kkt)
    out << num(x.snr_db) << ',' << x.trial << ',' << x.iterations << ',' << int(x.converged) << ','
        << num(x.min_rate) << ',' << num(x.stationarity) << ',' << num(x.complementarity) << ','
        << num(x.feasibility) << ',' << x.active << ',' << int(x.pass) << '\n';
}

void write_metadata_json(std::ostream& out, const ScenarioConfig& c, const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["version"] = std::string("mmfair ") + library_version();
  j["experiment"] = to_string(r.kind);
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["snr_db"] = c.snr_db;
  j["snr_definition"] = "SNR = P / sigma^2 with P fixed per BS and sigma^2 swept";
  j["algorithms"] = c.algorithms;
  j["topology"] = {{"cells", c.cells},           {"users_per_cell", c.users_per_cell},
                   {"tx_antennas", c.tx_antennas}, {"rx_antennas", c.rx_antennas},
                   {"streams", c.streams},         {"power", c.power}};
  j["tolerances"] = {{"tol", c.tol},         {"max_iters", c.max_iters}, {"qv_tol", c.qv_tol},
                     {"kkt_tol", c.kkt_tol}, {"rate_tol", c.rate_tol}};
  j["init"] = c.init == InitKind::svd ? "svd" : "random";
  j["rate_units"] = "bits";
  if (r.kind == ExperimentKind::dynamic) {
    j["iterations"] = c.iterations;
    j["fade_model"] = to_string(c.fade);
    nlohmann::ordered_json ev = nlohmann::ordered_json::array();
    for (const auto& e : c.events) {
      nlohmann::ordered_json x;
      x["type"] = event_name(e.type);
      x["iteration"] = e.iteration;
      if (e.type == EventSpec::user_join)
        x["cell"] = e.cell;
      else
        x["variance"] = e.variance;
      ev.push_back(x);
    }
    j["events"] = ev;
  }
  if (r.kind == ExperimentKind::kkt) {
    j["kkt_pass"] = std::count_if(r.kkt.begin(), r.kkt.end(), [](const KktRow& k) { return k.pass; });
    j["kkt_runs"] = r.kkt.size();
  }
  out << j.dump(2) << '\n';
}

std::vector<std::string> write_outputs(const ScenarioConfig& c, const ExperimentResult& r) {
  const std::filesystem::path base(c.output);
  if (base.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(base.parent_path(), ec);
    if (ec) fail(ErrorCode::io, "cannot create " + base.parent_path().string());
  }
  std::vector<std::string> written;
  auto emit = [&](const std::string& suffix, auto&& writer) {
    const std::string path = c.output + suffix;
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::io, "cannot write " + path);
    writer(f);
    if (!f) fail(ErrorCode::io, "write failed for " + path);
    written.push_back(path);
  };
  emit("_rates.csv", [&](std::ostream& o) { write_rates_csv(o, r); });
  if (r.kind == ExperimentKind::rate_cdf || r.kind == ExperimentKind::minrate_vs_snr) {
    emit("_summary.csv", [&](std::ostream& o) { write_summary_csv(o, r); });
    emit("_cdf.csv", [&](std::ostream& o) { write_cdf_csv(o, r); });
  }
  if (r.kind == ExperimentKind::dynamic)
    emit("_trace.csv", [&](std::ostream& o) { write_dynamic_csv(o, r); });
  if (r.kind == ExperimentKind::kkt) emit("_kkt.csv", [&](std::ostream& o) { write_kkt_csv(o, r); });
  emit(".json", [&](std::ostream& o) { write_metadata_json(o, c, r); });
  return written;
}

void write_network_json(std::ostream& out, const Network& net, const std::vector<UserLabel>* labels) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const CellSpec& c : net.topology.cells()) {
    nlohmann::ordered_json users = nlohmann::ordered_json::array();
    for (const UserSpec& u : c.users)
      users.push_back({{"rx_antennas", u.rx_antennas}, {"streams", u.streams}, {"noise", u.noise}});
    cells.push_back({{"tx_antennas", c.tx_antennas}, {"power", c.power}, {"users", users}});
  }
  j["cells"] = cells;
  nlohmann::ordered_json links = nlohmann::ordered_json::array();
  for (int u = 0; u < net.topology.num_users(); ++u)
    for (int l = 0; l < net.topology.num_cells(); ++l) {
      if (net.channels.is_zero(u, l)) continue;
      const CMatrix& h = net.channels(u, l);
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (Eigen::Index r = 0; r < h.rows(); ++r) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < h.cols(); ++c) row.push_back({h(r, c).real(), h(r, c).imag()});
        rows.push_back(row);
      }
      links.push_back({{"user", u}, {"bs", l}, {"h", rows}});
    }
  j["channels"] = links;
  if (labels) {
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (const auto& l : *labels) names.push_back(l.name());
    j["labels"] = names;
  }
  out << j.dump(2) << '\n';
}

Network read_network_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
    std::vector<CellSpec> cells;
    for (const auto& c : j.at("cells")) {
      CellSpec cs;
      cs.tx_antennas = c.at("tx_antennas").get<int>();
      cs.power = c.at("power").get<double>();
      for (const auto& u : c.at("users"))
        cs.users.push_back({u.at("rx_antennas").get<int>(), u.at("streams").get<int>(),
                            u.at("noise").get<double>()});
      cells.push_back(cs);
    }
    NetworkTopology topo(cells);
    ChannelSet ch(topo);
    for (const auto& link : j.at("channels")) {
      const int u = link.at("user").get<int>();
      const int l = link.at("bs").get<int>();
      if (u < 0 || u >= topo.num_users() || l < 0 || l >= topo.num_cells())
        fail(ErrorCode::input, "channel index out of range");
      const auto& rows = link.at("h");
      CMatrix h(topo.rx_antennas(u), topo.tx_antennas(l));
      if (static_cast<Eigen::Index>(rows.size()) != h.rows())
        fail(ErrorCode::shape, "channel row count mismatch");
      for (Eigen::Index r = 0; r < h.rows(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != h.cols())
          fail(ErrorCode::shape, "channel column count mismatch");
        for (Eigen::Index c = 0; c < h.cols(); ++c)
          h(r, c) = Complex(rows[r][c].at(0).get<double>(), rows[r][c].at(1).get<double>());
      }
      ch.set(u, l, h);
    }
    return Network{topo, ch};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::input, std::string("network json: ") + e.what());
  }
}

}  // namespace mmfair
