#pragma once

// Network data model and per-user link quantities for the multicell MIMO
// interfering broadcast channel: MSE matrices, rates, MMSE receivers and
// the weight (inverse-MSE) map.

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mmfair/error.hpp"

namespace mmfair {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;

/// Relative slack allowed on per-BS power budgets.
inline constexpr double kFeasibilityTol = 1e-8;

struct UserSpec {
  int rx_antennas = 1;
  int streams = 1;
  double noise = 1.0;  // linear noise variance
};

struct CellSpec {
  int tx_antennas = 1;
  double power = 1.0;  // linear power budget
  std::vector<UserSpec> users;
};

/// Cells, users and their dimensions. Users get a global index ordered by
/// (cell, position in cell); every per-user container in the library uses it.
class NetworkTopology {
 public:
  explicit NetworkTopology(std::vector<CellSpec> cells);

  static NetworkTopology uniform(int cells, int users_per_cell, int tx_antennas, int rx_antennas,
                                 int streams, double power, double noise);

  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_users() const { return static_cast<int>(cell_of_.size()); }

  int cell_of(int user) const { return cell_of_.at(user); }
  int tx_antennas(int cell) const { return cells_.at(cell).tx_antennas; }
  double power(int cell) const { return cells_.at(cell).power; }

  const UserSpec& user(int user) const;
  int rx_antennas(int u) const { return user(u).rx_antennas; }
  int streams(int u) const { return user(u).streams; }
  double noise(int u) const { return user(u).noise; }

  std::span<const int> users_in_cell(int cell) const { return members_.at(cell); }
  int user_index(int cell, int position) const { return members_.at(cell).at(position); }

  const std::vector<CellSpec>& cells() const { return cells_; }

  /// Copy with one extra user appended to `cell`. The new user's global
  /// index is `user_index(cell, users_in_cell(cell).size())` of the result.
  NetworkTopology with_user(int cell, const UserSpec& spec) const;
  /// Copy with every user's noise variance replaced.
  NetworkTopology with_noise(double noise) const;

  bool operator==(const NetworkTopology& other) const;

 private:
  std::vector<CellSpec> cells_;
  std::vector<int> cell_of_;
  std::vector<int> position_;
  std::vector<std::vector<int>> members_;
};

/// H(user, bs): N_user x M_bs channel from BS `bs` to receiver `user`.
class ChannelSet {
 public:
  explicit ChannelSet(const NetworkTopology& topology);

  const CMatrix& operator()(int user, int bs) const { return h_.at(slot(user, bs)); }
  void set(int user, int bs, CMatrix h);
  /// True when every entry of H(user, bs) is exactly zero; such links are
  /// skipped when summing interference.
  bool is_zero(int user, int bs) const { return zero_.at(slot(user, bs)) != 0; }

  int num_users() const { return users_; }
  int num_cells() const { return cells_; }

  /// Checks every block against `topology`; throws ErrorCode::shape.
  void validate(const NetworkTopology& topology) const;

 private:
  std::size_t slot(int user, int bs) const;

  int users_ = 0;
  int cells_ = 0;
  std::vector<CMatrix> h_;
  std::vector<char> zero_;
};

using BeamformerSet = std::vector<CMatrix>;

struct CovarianceSet {
  std::vector<CMatrix> q;
};

CovarianceSet covariances(const BeamformerSet& v);

struct TransceiverState {
  BeamformerSet v;
  std::vector<CMatrix> u;
  std::vector<CMatrix> w;
  double lambda = 0.0;  // min rate in bits at the stored V
};

struct UserLinkStats {
  CMatrix j;       // signal + interference + noise covariance
  CMatrix e_mmse;  // MSE matrix under the MMSE receiver
  double rate = 0.0;
};

struct MmseReceiver {
  CMatrix u;
  UserLinkStats stats;
};

struct WeightUpdate {
  CMatrix w;
  bool regularized = false;
};

CMatrix hermitian_part(const CMatrix& a);
/// Natural log-determinant of a Hermitian positive definite matrix.
/// Throws ErrorCode::domain when the Cholesky factorization fails.
double log_det_hpd(const CMatrix& a);

void check_beamformers(const NetworkTopology& topology, const BeamformerSet& v);
void check_covariances(const NetworkTopology& topology, const CovarianceSet& q);

double bs_power(const NetworkTopology& topology, const BeamformerSet& v, int cell);
std::vector<double> bs_powers(const NetworkTopology& topology, const BeamformerSet& v);
bool is_feasible(const NetworkTopology& topology, const BeamformerSet& v,
                 double tol = kFeasibilityTol);

/// MSE matrix of `user` for an arbitrary receive filter `u`.
CMatrix mse_matrix(const NetworkTopology& topology, const ChannelSet& channels,
                   const BeamformerSet& v, const CMatrix& u, int user);

/// Rate in bits, interference treated as noise.
double user_rate(const NetworkTopology& topology, const ChannelSet& channels,
                 const BeamformerSet& v, int user);
double user_rate(const NetworkTopology& topology, const ChannelSet& channels,
                 const CovarianceSet& q, int user);

std::vector<double> user_rates(const NetworkTopology& topology, const ChannelSet& channels,
                               const BeamformerSet& v);
std::vector<double> user_rates(const NetworkTopology& topology, const ChannelSet& channels,
                               const CovarianceSet& q);

double min_rate(const NetworkTopology& topology, const ChannelSet& channels,
                const BeamformerSet& v);
double min_rate(const NetworkTopology& topology, const ChannelSet& channels,
                const CovarianceSet& q);

MmseReceiver mmse_receiver(const NetworkTopology& topology, const ChannelSet& channels,
                           const BeamformerSet& v, int user);

/// W = E^-1. Throws ErrorCode::conditioning when cond(E) > 1e12; adds
/// 1e-12 I (and sets `regularized`) if the factorization still fails.
WeightUpdate weight_update(const CMatrix& e_mmse);

/// (Tr[W E] - ln det W - d) / ln 2. At W = E^-1 this is log2 det E, i.e.
/// minus the rate when E is the MMSE matrix. Throws ErrorCode::domain for
/// a non-PD W.
double wmmse_surrogate_value(const CMatrix& w, const CMatrix& e, int streams);

/// U = Psi(V), W = Upsilon(V), lambda = min rate. Returns the per-user rates.
std::vector<double> refresh_receivers(const NetworkTopology& topology, const ChannelSet& channels,
                                      TransceiverState& state);

/// max over users of the surrogate at the stored (V, U, W).
double surrogate_objective(const NetworkTopology& topology, const ChannelSet& channels,
                           const TransceiverState& state);

}  // namespace mmfair
