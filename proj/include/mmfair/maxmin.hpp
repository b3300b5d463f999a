#pragma once

// Alternating max-min transceiver design: V from the convex subproblem,
// then U and W refreshed to the MMSE receiver and inverse MSE matrix.
// Includes numerical KKT certification of the returned point and the warm
// start rules used when the network changes mid-run.

#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mmfair/model.hpp"
#include "mmfair/qv_solver.hpp"

namespace mmfair {

enum class StopRule {
  objective,  // |G^{n+1} - G^n| <= tol (1 + |G^n|)
  min_rate,   // |r^{n+1} - r^n| <= tol (1 + |r^n|)
};

struct MaxMinOptions {
  int max_iters = 300;
  double tol = 1e-6;
  StopRule stop = StopRule::objective;
  QvOptions qv;
  bool warm_start_mu = true;  // seed each subproblem with the previous multipliers
};

struct IterationRecord {
  int iteration = 0;
  double g = 0.0;      // objective of (Q) after the U/W refresh
  double g_mid = 0.0;  // objective after the V step, before the refresh
  double min_rate = 0.0;
  std::vector<double> rates;
  std::vector<double> powers;
  bool qv_converged = true;
  bool qv_barrier = false;  // subproblem finished by the primal fallback
  double qv_gap = 0.0;
  int qv_iterations = 0;
};

struct SolverTrace {
  std::vector<IterationRecord> records;  // records[0] is the initial point
  bool converged = false;
};

struct MaxMinResult {
  TransceiverState state;
  SolverTrace trace;
  std::vector<double> mu;  // last subproblem multipliers
};

/// sqrt(P_k / (I_k d)) times the leading right singular vectors of the
/// direct channel.
BeamformerSet svd_init(const NetworkTopology& topology, const ChannelSet& channels);
/// Isotropic Gaussian directions, each user at P_k / I_k.
BeamformerSet random_init(const NetworkTopology& topology, std::mt19937_64& rng);

/// Per-iteration driver; one object owns one run.
class MaxMinIteration {
 public:
  MaxMinIteration(NetworkTopology topology, ChannelSet channels, BeamformerSet init,
                  MaxMinOptions options = {});

  /// One V / U / W sweep.
  IterationRecord step();
  /// Record describing the current state (no update).
  IterationRecord snapshot(int iteration) const;

  /// Replace network and state (dynamic events); U/W are refreshed.
  void reset(NetworkTopology topology, ChannelSet channels, BeamformerSet v);

  const NetworkTopology& topology() const { return topology_; }
  const ChannelSet& channels() const { return channels_; }
  const TransceiverState& state() const { return state_; }
  const std::vector<double>& mu() const { return mu_; }
  int iteration() const { return iteration_; }

 private:
  NetworkTopology topology_;
  ChannelSet channels_;
  MaxMinOptions options_;
  TransceiverState state_;
  std::vector<double> rates_;
  std::vector<double> mu_;
  double g_ = 0.0;
  int iteration_ = 0;
};

bool stop_reached(const MaxMinOptions& options, const IterationRecord& prev,
                  const IterationRecord& next);

/// Throws ErrorCode::feasibility if `init` violates a power budget.
MaxMinResult run_maxmin(const NetworkTopology& topology, const ChannelSet& channels,
                        const BeamformerSet& init, const MaxMinOptions& options = {});

struct KktOptions {
  double rate_tol = 1e-5;  // bits; users this close to the min rate are active
  double mu_tol = 1e-8;
  double mu_ridge = 1e-2;        // relative Tikhonov weight on mu, tie-break fit
  double mu_ridge_slack = 1e-8;  // stationarity the tie-break may give up
  double kkt_tol = 1e-4;
};

struct KktReport {
  std::vector<int> active_set;  // users with mu > mu_tol
  std::vector<double> mu;       // per user, zero outside the candidate set
  std::vector<double> eps;      // per BS
  double stationarity_residual = 0.0;
  double complementarity_residual = 0.0;
  double feasibility_residual = 0.0;
  bool pass = false;
};

/// Gradient of R_user (bits) with respect to conj(V_m), for every m.
std::vector<CMatrix> rate_gradient(const NetworkTopology& topology, const ChannelSet& channels,
                                   const BeamformerSet& v, int user);

/// Fits (mu, eps) to the stationarity condition of the max-min problem at
/// the state's V and reports the residuals.
KktReport kkt_residuals(const NetworkTopology& topology, const ChannelSet& channels,
                        const TransceiverState& state, const KktOptions& options = {});

struct UserJoin {
  int cell = 0;
  UserSpec spec;
  std::vector<CMatrix> channels;  // H(new user, l) for every BS l
  CMatrix direction;              // M x d, rescaled to the residual budget
};

struct ChannelChange {
  ChannelSet channels;
};

using NetworkEvent = std::variant<UserJoin, ChannelChange>;

struct EventOutcome {
  NetworkTopology topology;
  ChannelSet channels;
  TransceiverState state;
  int new_user = -1;
};

/// User join: incumbents of the cell keep 2/3 of their power and the new
/// user gets the rest. Channel change: V carried over. U/W are refreshed.
EventOutcome reinitialize_on_event(const NetworkTopology& topology, const ChannelSet& channels,
                                   const TransceiverState& state, const NetworkEvent& event);

/// kind,iteration,G,min_rate,rate_0..,power_0..
void write_trace_csv(std::ostream& out, const std::string& kind, const SolverTrace& trace);

}  // namespace mmfair
