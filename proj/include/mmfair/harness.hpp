#pragma once

// Scenario configuration, seeded channel draws and the Monte Carlo drivers
// behind the `run` and `kkt` subcommands.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmfair/hardness.hpp"
#include "mmfair/maxmin.hpp"

namespace mmfair {

enum class ExperimentKind { rate_cdf, minrate_vs_snr, dynamic, kkt };
enum class FadeModel {
  additive,  // H + dH, dH ~ CN(0, v)
  convex,    // sqrt(1 - v) H + sqrt(v) G, G ~ CN(0, 1)
};
enum class InitKind { svd, random };

struct EventSpec {
  enum Type { user_join, channel_change } type = user_join;
  int iteration = 0;  // applied after this many iterations
  int cell = 0;       // user_join
  double variance = 0.1;  // channel_change
};

struct ScenarioConfig {
  int cells = 4;
  int users_per_cell = 3;
  int tx_antennas = 6;
  int rx_antennas = 2;
  int streams = 1;
  double power = 1.0;

  ExperimentKind kind = ExperimentKind::rate_cdf;
  std::vector<double> snr_db{20.0};
  int trials = 50;
  std::uint64_t seed = 1;
  std::vector<std::string> algorithms{"maxmin", "wmmse", "mmse"};
  int max_iters = 300;
  double tol = 1e-6;
  double qv_tol = 1e-6;
  InitKind init = InitKind::svd;
  int threads = 0;

  int iterations = 30;  // dynamic horizon
  FadeModel fade = FadeModel::additive;
  std::vector<EventSpec> events;

  double kkt_tol = 1e-4;
  double rate_tol = 1e-5;

  std::string output = "mmfair";
};

/// Throws ErrorCode::config for broken invariants (zero trials, empty SNR
/// list, unknown algorithm, d > min(M, N), ...).
void validate(const ScenarioConfig& config);

ScenarioConfig parse_config(const std::string& toml_text);
/// ErrorCode::io when the file cannot be read.
ScenarioConfig load_config(const std::string& path);

/// cdf, snr, dynamic, kkt (or rate_cdf, minrate_vs_snr).
ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(ExperimentKind kind);
std::string to_string(FadeModel model);

/// sigma^2 = P / 10^(snr_db / 10).
double noise_for_snr(double power, double snr_db);
NetworkTopology scenario_topology(const ScenarioConfig& config, double snr_db);

/// CN(0, 1) entries, drawn from a stream keyed by (seed, trial) only, so the
/// same trial sees the same channels at every SNR.
ChannelSet generate_channels(const ScenarioConfig& config, int trial_index);

inline constexpr std::uint64_t kStreamChannels = 0;
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamEvents = 2;

struct RateRow {
  std::string algorithm;
  double snr_db = 0.0;
  int trial = 0;
  int user = 0;
  int cell = 0;
  double rate = 0.0;
};

struct SummaryRow {
  std::string algorithm;
  double snr_db = 0.0;
  int trials = 0;
  double mean_min_rate = 0.0;
  double mean_sum_rate = 0.0;
  double p5_user_rate = 0.0;
  double mean_iterations = 0.0;
  int converged = 0;
};

struct CdfPoint {
  std::string algorithm;
  double snr_db = 0.0;
  double rate = 0.0;
  double cdf = 0.0;
};

struct DynamicRow {
  int trial = 0;
  int iteration = 0;
  std::string event;  // empty, user_join or channel_change
  int users = 0;
  double g = 0.0;
  double min_rate = 0.0;
};

struct KktRow {
  double snr_db = 0.0;
  int trial = 0;
  int iterations = 0;
  bool converged = false;
  double min_rate = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double feasibility = 0.0;
  int active = 0;
  bool pass = false;
};

struct TrialState {
  std::string algorithm;
  double snr_db = 0.0;
  int trial = 0;
  BeamformerSet v;
};

struct ExperimentResult {
  ExperimentKind kind = ExperimentKind::rate_cdf;
  std::vector<RateRow> rates;
  std::vector<SummaryRow> summary;
  std::vector<CdfPoint> cdf;
  std::vector<DynamicRow> trace;
  std::vector<KktRow> kkt;
  std::vector<TrialState> states;  // final beamformers, one per (algorithm, snr, trial)
};

/// Linear interpolation between order statistics.
double percentile(std::vector<double> values, double p);

/// One algorithm on one network; `label` is maxmin or a baseline tag.
struct AlgorithmRun {
  TransceiverState state;
  SolverTrace trace;
  std::vector<double> rates;
};
AlgorithmRun run_algorithm(const std::string& label, const ScenarioConfig& config,
                           const NetworkTopology& topology, const ChannelSet& channels,
                           const BeamformerSet& init);
BeamformerSet initial_beamformers(const ScenarioConfig& config, const NetworkTopology& topology,
                                  const ChannelSet& channels, int trial_index);

/// All algorithms at snr_db.front().
ExperimentResult run_rate_cdf(const ScenarioConfig& config);
/// All algorithms at every SNR of the list.
ExperimentResult run_minrate_vs_snr(const ScenarioConfig& config);
/// The max-min iteration with the event schedule, at snr_db.front().
ExperimentResult run_dynamic(const ScenarioConfig& config);
/// Max-min runs followed by KKT certification, every SNR.
ExperimentResult run_kkt(const ScenarioConfig& config);
ExperimentResult run_experiment(const ScenarioConfig& config);

void write_rates_csv(std::ostream& out, const ExperimentResult& result);
void write_summary_csv(std::ostream& out, const ExperimentResult& result);
void write_cdf_csv(std::ostream& out, const ExperimentResult& result);
void write_dynamic_csv(std::ostream& out, const ExperimentResult& result);
void write_kkt_csv(std::ostream& out, const ExperimentResult& result);
void write_metadata_json(std::ostream& out, const ScenarioConfig& config,
                         const ExperimentResult& result);

/// Writes `<output>_*.csv` and `<output>.json`; returns the paths written.
std::vector<std::string> write_outputs(const ScenarioConfig& config, const ExperimentResult& result);

/// Dimensions, budgets, noise and every channel matrix as [re, im] pairs.
void write_network_json(std::ostream& out, const Network& network,
                        const std::vector<UserLabel>* labels = nullptr);
Network read_network_json(std::istream& in);

const char* library_version();

}  // namespace mmfair
