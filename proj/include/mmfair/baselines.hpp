#pragma once

// Comparison schemes built from the same U / W / V alternation as the
// max-min solver, differing only in the weight matrices W.

#include <string>
#include <string_view>

#include "mmfair/maxmin.hpp"

namespace mmfair {

enum class BaselineKind {
  SumRateWMMSE,  // W = E^-1
  SumMSE,        // W = I (single stream only)
  LogSumExp,     // W = exp(-R) E^-1, R in nats (single stream only)
  GeoMeanWMMSE,  // W = E^-1 / max(R, r_floor), R in bits
};

std::string_view to_string(BaselineKind kind);
/// Accepts the tags above and the short labels wmmse, mmse, lse, gwmmse.
BaselineKind parse_baseline(std::string_view name);

struct BaselineOptions {
  int max_iters = 300;
  double tol = 1e-6;  // relative change of the kind's objective
  double rate_floor = 1e-3;
};

struct BaselineResult {
  TransceiverState state;
  SolverTrace trace;  // g holds the kind's objective, lower is better
};

/// The kind's objective at the stored rates / MSEs (minimized):
/// -sum R, sum Tr E, sum exp(-R), -sum ln max(R, r_floor).
double baseline_objective(BaselineKind kind, const std::vector<double>& rates,
                          const std::vector<double>& mse_traces, double rate_floor);

/// Throws ErrorCode::config when the kind needs d = 1 and a user has more
/// streams, ErrorCode::feasibility for an infeasible init.
BaselineResult run_baseline(BaselineKind kind, const NetworkTopology& topology,
                            const ChannelSet& channels, const BeamformerSet& init,
                            const BaselineOptions& options = {});

}  // namespace mmfair
