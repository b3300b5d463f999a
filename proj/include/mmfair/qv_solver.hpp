#pragma once

// Convex min-max subproblem in V for fixed receivers U and weights W:
//
//   minimize_V  max_i  f_i(V)   s.t. per-BS power budgets,
//   f_i(V) = (Tr[W_i E_i(U_i, V)] - ln det W_i - d_i) / ln 2.
//
// Solved through its Lagrangian dual over the user simplex: for fixed
// multipliers mu the inner problem separates per BS and has a closed form
// up to one scalar power multiplier per BS (found by bisection); mu is
// updated by entropic mirror ascent on the dual function.

#include <optional>
#include <span>
#include <vector>

#include "mmfair/model.hpp"

namespace mmfair {

struct QvOptions {
  double tol_gap = 1e-6;  // stop when gap <= tol_gap * (1 + |gamma|)
  int max_outer = 2000;   // budget in inner evaluations
  int max_bisect = 200;
  double initial_step = 1.0;
  double min_step = 1e-6;
  double newton_handoff = 1e-3;  // relative gap at which mirror ascent hands over
  int max_newton = 30;
  double mu_floor = 1e-15;       // entries are floored before each mirror step
  double max_log_step = 5.0;     // cap on a Newton step in log(mu)
  double fd_step = 1e-6;         // Jacobian probe in log(mu)
  bool barrier_fallback = true;  // primal barrier when the dual stage stalls
  int max_barrier_newton = 400;
};

struct DualState {
  std::vector<double> mu;   // user multipliers, on the unit simplex
  std::vector<double> eps;  // per-BS power multipliers
  double gap = 0.0;
};

struct QvSolution {
  BeamformerSet v;
  double gamma = 0.0;       // max_i f_i at v
  double dual_value = 0.0;  // best dual lower bound
  DualState dual;
  std::vector<double> surrogates;  // f_i at v
  int iterations = 0;
  bool converged = false;
  bool kept_incoming = false;  // the incoming V was better than every dual iterate
  bool used_barrier = false;
};

/// Quadratic data of the subproblem for a fixed (U, W).
class QvProblem {
 public:
  QvProblem(const NetworkTopology& topology, const ChannelSet& channels,
            const std::vector<CMatrix>& u, const std::vector<CMatrix>& w);

  struct Inner {
    BeamformerSet v;
    std::vector<double> eps;
  };

  /// f_i(V) for every user, in bits.
  std::vector<double> surrogates(const BeamformerSet& v) const;

  /// argmin_V sum_i mu_i f_i(V) under the power budgets; mu is normalized
  /// to the simplex first.
  Inner minimize_weighted(std::span<const double> mu, int max_bisect = 200) const;

  struct Barrier {
    BeamformerSet v;
    double gamma = 0.0;        // max f at v
    double lower_bound = 0.0;  // central-path bound, -inf unless converged
    std::vector<double> mu;
    int newton_steps = 0;
    bool converged = false;
  };

  /// Log-barrier Newton method on min gamma s.t. f_i <= gamma and the power
  /// budgets, started from `start` (shrunk into the interior if needed).
  Barrier solve_barrier(const BeamformerSet& start, double tol_abs, int max_newton = 400) const;

  const NetworkTopology& topology() const { return topology_; }

 private:
  NetworkTopology topology_;
  int users_ = 0;
  int cells_ = 0;
  std::vector<CMatrix> w_;
  std::vector<double> constant_;         // Tr W + s2 Tr(W U^H U) - ln det W - d
  std::vector<CMatrix> b_;               // H(i, l)^H U_i, M_l x d_i
  std::vector<CMatrix> c_;               // B W B^H, M_l x M_l
  std::vector<char> link_;               // nonzero H(i, l)

  std::size_t slot(int user, int bs) const { return static_cast<std::size_t>(user) * cells_ + bs; }
};

/// Closed-form inner minimizer of sum_i mu_i Tr[W_i E_i] under the power
/// budgets. Writes the per-BS multipliers to `eps` when given.
BeamformerSet weighted_v_update(const NetworkTopology& topology, const ChannelSet& channels,
                                const std::vector<CMatrix>& u, const std::vector<CMatrix>& w,
                                std::span<const double> mu, std::vector<double>* eps = nullptr,
                                int max_bisect = 200);

class QvSolver {
 public:
  QvSolver(const NetworkTopology& topology, const ChannelSet& channels,
           const std::vector<CMatrix>& u, const std::vector<CMatrix>& w, QvOptions options = {});

  /// `incoming`, when given, is returned instead of the dual iterate if it
  /// has a lower max-surrogate. `warm_mu` seeds the multipliers.
  QvSolution solve(const BeamformerSet* incoming = nullptr,
                   std::span<const double> warm_mu = {});

  const QvProblem& problem() const { return problem_; }

 private:
  QvProblem problem_;
  QvOptions options_;
};

QvSolution solve_qv(const NetworkTopology& topology, const ChannelSet& channels,
                    const std::vector<CMatrix>& u, const std::vector<CMatrix>& w,
                    const QvOptions& options = {}, const BeamformerSet* incoming = nullptr,
                    std::span<const double> warm_mu = {});

}  // namespace mmfair
