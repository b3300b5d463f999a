#include "mmfair/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace mmfair {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::shape: return "shape";
    case ErrorCode::domain: return "domain";
    case ErrorCode::conditioning: return "conditioning";
    case ErrorCode::solver: return "solver";
    case ErrorCode::feasibility: return "feasibility";
    case ErrorCode::config: return "config";
    case ErrorCode::input: return "input";
    case ErrorCode::budget: return "budget";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

namespace {

std::string dims(const CMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Sum over all transmitted streams of H V V^H H^H seen at `user`, with
// `skip` excluded (pass -1 to include every stream).
CMatrix received_covariance(const NetworkTopology& topology, const ChannelSet& channels,
                            const BeamformerSet& v, int user, int skip) {
  const int n = topology.rx_antennas(user);
  CMatrix acc = CMatrix::Zero(n, n);
  for (int m = 0; m < topology.num_users(); ++m) {
    if (m == skip) continue;
    const int bs = topology.cell_of(m);
    if (channels.is_zero(user, bs) || v[m].size() == 0) continue;
    const CMatrix hv = channels(user, bs) * v[m];
    acc.noalias() += hv * hv.adjoint();
  }
  return acc;
}

CMatrix received_covariance(const NetworkTopology& topology, const ChannelSet& channels,
                            const CovarianceSet& q, int user, int skip) {
  const int n = topology.rx_antennas(user);
  CMatrix acc = CMatrix::Zero(n, n);
  for (int m = 0; m < topology.num_users(); ++m) {
    if (m == skip) continue;
    const int bs = topology.cell_of(m);
    if (channels.is_zero(user, bs)) continue;
    const CMatrix& h = channels(user, bs);
    acc.noalias() += h * q.q[m] * h.adjoint();
  }
  return acc;
}

double rate_from_covariances(const CMatrix& signal, const CMatrix& interference, double noise) {
  CMatrix noise_cov = interference;
  noise_cov.diagonal().array() += noise;
  const CMatrix total = hermitian_part(noise_cov + signal);
  const double r = (log_det_hpd(total) - log_det_hpd(hermitian_part(noise_cov))) /
                   std::numbers::ln2;
  return std::max(r, 0.0);
}

}  // namespace

NetworkTopology::NetworkTopology(std::vector<CellSpec> cells) : cells_(std::move(cells)) {
  if (cells_.empty()) fail(ErrorCode::config, "topology needs at least one cell");
  members_.resize(cells_.size());
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const CellSpec& c = cells_[k];
    if (c.tx_antennas < 1) fail(ErrorCode::config, "cell " + std::to_string(k) + ": M < 1");
    if (!(c.power > 0.0)) fail(ErrorCode::config, "cell " + std::to_string(k) + ": P <= 0");
    for (std::size_t i = 0; i < c.users.size(); ++i) {
      const UserSpec& u = c.users[i];
      if (u.rx_antennas < 1 || u.streams < 1)
        fail(ErrorCode::config, "cell " + std::to_string(k) + " user " + std::to_string(i) +
                                    ": antenna and stream counts must be >= 1");
      if (u.streams > std::min(c.tx_antennas, u.rx_antennas))
        fail(ErrorCode::config, "cell " + std::to_string(k) + " user " + std::to_string(i) +
                                    ": streams exceed min(M, N)");
      if (!(u.noise > 0.0))
        fail(ErrorCode::config, "cell " + std::to_string(k) + " user " + std::to_string(i) +
                                    ": noise variance must be > 0");
      members_[k].push_back(static_cast<int>(cell_of_.size()));
      cell_of_.push_back(static_cast<int>(k));
      position_.push_back(static_cast<int>(i));
    }
  }
  if (cell_of_.empty()) fail(ErrorCode::config, "topology has no users");
}

NetworkTopology NetworkTopology::uniform(int cells, int users_per_cell, int tx_antennas,
                                         int rx_antennas, int streams, double power,
                                         double noise) {
  if (cells < 1 || users_per_cell < 1) fail(ErrorCode::config, "K and I must be >= 1");
  CellSpec cell{tx_antennas, power, {}};
  cell.users.assign(users_per_cell, UserSpec{rx_antennas, streams, noise});
  return NetworkTopology(std::vector<CellSpec>(cells, cell));
}

const UserSpec& NetworkTopology::user(int u) const {
  return cells_.at(cell_of_.at(u)).users.at(position_.at(u));
}

NetworkTopology NetworkTopology::with_user(int cell, const UserSpec& spec) const {
  if (cell < 0 || cell >= num_cells()) fail(ErrorCode::config, "no such cell");
  auto cells = cells_;
  cells[cell].users.push_back(spec);
  return NetworkTopology(std::move(cells));
}

NetworkTopology NetworkTopology::with_noise(double noise) const {
  auto cells = cells_;
  for (auto& c : cells)
    for (auto& u : c.users) u.noise = noise;
  return NetworkTopology(std::move(cells));
}

bool NetworkTopology::operator==(const NetworkTopology& other) const {
  if (cells_.size() != other.cells_.size()) return false;
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    const auto& a = cells_[k];
    const auto& b = other.cells_[k];
    if (a.tx_antennas != b.tx_antennas || a.power != b.power || a.users.size() != b.users.size())
      return false;
    for (std::size_t i = 0; i < a.users.size(); ++i) {
      if (a.users[i].rx_antennas != b.users[i].rx_antennas ||
          a.users[i].streams != b.users[i].streams || a.users[i].noise != b.users[i].noise)
        return false;
    }
  }
  return true;
}

ChannelSet::ChannelSet(const NetworkTopology& topology)
    : users_(topology.num_users()), cells_(topology.num_cells()) {
  h_.reserve(static_cast<std::size_t>(users_) * cells_);
  for (int u = 0; u < users_; ++u)
    for (int k = 0; k < cells_; ++k)
      h_.push_back(CMatrix::Zero(topology.rx_antennas(u), topology.tx_antennas(k)));
  zero_.assign(h_.size(), 1);
}

std::size_t ChannelSet::slot(int user, int bs) const {
  if (user < 0 || user >= users_ || bs < 0 || bs >= cells_)
    fail(ErrorCode::shape, "channel index out of range");
  return static_cast<std::size_t>(user) * cells_ + bs;
}

void ChannelSet::set(int user, int bs, CMatrix h) {
  const std::size_t s = slot(user, bs);
  if (h.rows() != h_[s].rows() || h.cols() != h_[s].cols())
    fail(ErrorCode::shape, "channel (" + std::to_string(user) + "," + std::to_string(bs) +
                               ") expects " + dims(h_[s]) + ", got " + dims(h));
  zero_[s] = h.isZero(0.0) ? 1 : 0;
  h_[s] = std::move(h);
}

void ChannelSet::validate(const NetworkTopology& topology) const {
  if (users_ != topology.num_users() || cells_ != topology.num_cells())
    fail(ErrorCode::shape, "channel set does not cover the topology");
  for (int u = 0; u < users_; ++u)
    for (int k = 0; k < cells_; ++k) {
      const CMatrix& h = (*this)(u, k);
      if (h.rows() != topology.rx_antennas(u) || h.cols() != topology.tx_antennas(k))
        fail(ErrorCode::shape, "channel (" + std::to_string(u) + "," + std::to_string(k) +
                                   ") has shape " + dims(h));
    }
}

CovarianceSet covariances(const BeamformerSet& v) {
  CovarianceSet out;
  out.q.reserve(v.size());
  for (const auto& vi : v) out.q.push_back(hermitian_part(vi * vi.adjoint()));
  return out;
}

CMatrix hermitian_part(const CMatrix& a) { return (a + a.adjoint()) * 0.5; }

double log_det_hpd(const CMatrix& a) {
  Eigen::LLT<CMatrix> llt(a);
  if (llt.info() != Eigen::Success) fail(ErrorCode::domain, "matrix is not positive definite");
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double d = l(i, i).real();
    if (!(d > 0.0)) fail(ErrorCode::domain, "matrix is not positive definite");
    s += std::log(d);
  }
  return 2.0 * s;
}

void check_beamformers(const NetworkTopology& topology, const BeamformerSet& v) {
  if (static_cast<int>(v.size()) != topology.num_users())
    fail(ErrorCode::shape, "beamformer set has " + std::to_string(v.size()) + " entries, topology has " +
                               std::to_string(topology.num_users()) + " users");
  for (int u = 0; u < topology.num_users(); ++u) {
    if (v[u].rows() != topology.tx_antennas(topology.cell_of(u)) ||
        v[u].cols() != topology.streams(u))
      fail(ErrorCode::shape, "beamformer of user " + std::to_string(u) + " has shape " + dims(v[u]));
  }
}

void check_covariances(const NetworkTopology& topology, const CovarianceSet& q) {
  if (static_cast<int>(q.q.size()) != topology.num_users())
    fail(ErrorCode::shape, "covariance set size does not match topology");
  for (int u = 0; u < topology.num_users(); ++u) {
    const int m = topology.tx_antennas(topology.cell_of(u));
    if (q.q[u].rows() != m || q.q[u].cols() != m)
      fail(ErrorCode::shape, "covariance of user " + std::to_string(u) + " has shape " + dims(q.q[u]));
  }
}

double bs_power(const NetworkTopology& topology, const BeamformerSet& v, int cell) {
  double p = 0.0;
  for (int u : topology.users_in_cell(cell)) p += v.at(u).squaredNorm();
  return p;
}

std::vector<double> bs_powers(const NetworkTopology& topology, const BeamformerSet& v) {
  std::vector<double> out(topology.num_cells());
  for (int k = 0; k < topology.num_cells(); ++k) out[k] = bs_power(topology, v, k);
  return out;
}

bool is_feasible(const NetworkTopology& topology, const BeamformerSet& v, double tol) {
  for (int k = 0; k < topology.num_cells(); ++k)
    if (bs_power(topology, v, k) > topology.power(k) * (1.0 + tol)) return false;
  return true;
}

CMatrix mse_matrix(const NetworkTopology& topology, const ChannelSet& channels,
                   const BeamformerSet& v, const CMatrix& u, int user) {
  check_beamformers(topology, v);
  const int n = topology.rx_antennas(user);
  const int d = topology.streams(user);
  if (u.rows() != n || u.cols() != d)
    fail(ErrorCode::shape, "receiver of user " + std::to_string(user) + " has shape " + dims(u));
  const CMatrix gain = u.adjoint() * channels(user, topology.cell_of(user)) * v[user];
  const CMatrix err = CMatrix::Identity(d, d) - gain;
  const CMatrix interference = received_covariance(topology, channels, v, user, user);
  CMatrix e = err * err.adjoint() + u.adjoint() * interference * u +
              topology.noise(user) * (u.adjoint() * u);
  return hermitian_part(e);
}

double user_rate(const NetworkTopology& topology, const ChannelSet& channels,
                 const BeamformerSet& v, int user) {
  check_beamformers(topology, v);
  const CMatrix hv = channels(user, topology.cell_of(user)) * v[user];
  return rate_from_covariances(hv * hv.adjoint(),
                               received_covariance(topology, channels, v, user, user),
                               topology.noise(user));
}

double user_rate(const NetworkTopology& topology, const ChannelSet& channels,
                 const CovarianceSet& q, int user) {
  check_covariances(topology, q);
  const CMatrix& h = channels(user, topology.cell_of(user));
  return rate_from_covariances(h * q.q[user] * h.adjoint(),
                               received_covariance(topology, channels, q, user, user),
                               topology.noise(user));
}

std::vector<double> user_rates(const NetworkTopology& topology, const ChannelSet& channels,
                               const BeamformerSet& v) {
  std::vector<double> r(topology.num_users());
  for (int u = 0; u < topology.num_users(); ++u) r[u] = user_rate(topology, channels, v, u);
  return r;
}

std::vector<double> user_rates(const NetworkTopology& topology, const ChannelSet& channels,
                               const CovarianceSet& q) {
  std::vector<double> r(topology.num_users());
  for (int u = 0; u < topology.num_users(); ++u) r[u] = user_rate(topology, channels, q, u);
  return r;
}

double min_rate(const NetworkTopology& topology, const ChannelSet& channels,
                const BeamformerSet& v) {
  const auto r = user_rates(topology, channels, v);
  return *std::min_element(r.begin(), r.end());
}

double min_rate(const NetworkTopology& topology, const ChannelSet& channels,
                const CovarianceSet& q) {
  const auto r = user_rates(topology, channels, q);
  return *std::min_element(r.begin(), r.end());
}

MmseReceiver mmse_receiver(const NetworkTopology& topology, const ChannelSet& channels,
                           const BeamformerSet& v, int user) {
  check_beamformers(topology, v);
  const int d = topology.streams(user);
  CMatrix j = received_covariance(topology, channels, v, user, -1);
  j.diagonal().array() += topology.noise(user);
  j = hermitian_part(j);
  const CMatrix hv = channels(user, topology.cell_of(user)) * v[user];

  MmseReceiver out;
  Eigen::LLT<CMatrix> llt(j);
  if (llt.info() != Eigen::Success) fail(ErrorCode::conditioning, "J is not positive definite");
  out.u = llt.solve(hv);
  out.stats.e_mmse = hermitian_part(CMatrix::Identity(d, d) - hv.adjoint() * out.u);
  out.stats.j = std::move(j);
  out.stats.rate = std::max(0.0, -log_det_hpd(out.stats.e_mmse) / std::numbers::ln2);
  return out;
}

WeightUpdate weight_update(const CMatrix& e_mmse) {
  if (e_mmse.rows() != e_mmse.cols()) fail(ErrorCode::shape, "MSE matrix must be square");
  const CMatrix e = hermitian_part(e_mmse);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(e, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12)
    fail(ErrorCode::conditioning, "MSE matrix is near-singular (cond > 1e12)");

  WeightUpdate out;
  const auto n = e.rows();
  Eigen::LLT<CMatrix> llt(e);
  if (llt.info() != Eigen::Success) {
    CMatrix reg = e;
    reg.diagonal().array() += 1e-12;
    llt.compute(reg);
    out.regularized = true;
    if (llt.info() != Eigen::Success) fail(ErrorCode::conditioning, "MSE matrix factorization failed");
  }
  out.w = hermitian_part(llt.solve(CMatrix::Identity(n, n)));
  return out;
}

double wmmse_surrogate_value(const CMatrix& w, const CMatrix& e, int streams) {
  if (w.rows() != w.cols() || w.rows() != e.rows() || e.rows() != e.cols() || w.rows() != streams)
    fail(ErrorCode::shape, "weight/MSE shapes do not match stream count");
  double ld = 0.0;
  try {
    ld = log_det_hpd(hermitian_part(w));
  } catch (const Error&) {
    fail(ErrorCode::domain, "weight matrix is not positive definite");
  }
  const double tr = (w * e).trace().real();
  return (tr - ld - streams) / std::numbers::ln2;
}

std::vector<double> refresh_receivers(const NetworkTopology& topology, const ChannelSet& channels,
                                      TransceiverState& state) {
  const int users = topology.num_users();
  state.u.resize(users);
  state.w.resize(users);
  std::vector<double> rates(users);
  for (int i = 0; i < users; ++i) {
    MmseReceiver rx = mmse_receiver(topology, channels, state.v, i);
    state.w[i] = weight_update(rx.stats.e_mmse).w;
    state.u[i] = std::move(rx.u);
    rates[i] = rx.stats.rate;
  }
  state.lambda = *std::min_element(rates.begin(), rates.end());
  return rates;
}

double surrogate_objective(const NetworkTopology& topology, const ChannelSet& channels,
                           const TransceiverState& state) {
  double g = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < topology.num_users(); ++i) {
    const CMatrix e = mse_matrix(topology, channels, state.v, state.u[i], i);
    g = std::max(g, wmmse_surrogate_value(state.w[i], e, topology.streams(i)));
  }
  return g;
}

}  // namespace mmfair
