#include "mmfair/qv_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace mmfair {

namespace {

// Smallest eps >= 0 with sum_j z_j / (lambda_j + eps)^2 <= budget.
// Components with lambda_j ~ 0 and z_j ~ 0 are dropped (pseudo-inverse).
double power_multiplier(const Eigen::VectorXd& lambda, const Eigen::VectorXd& z, double budget,
                        int max_bisect) {
  const double lmax = std::max(lambda.maxCoeff(), 0.0);
  const double ztot = z.sum();
  if (!(ztot > 0.0)) return 0.0;
  const double null_tol = 1e-13 * std::max(lmax, 1e-300);
  const double z_tol = 1e-24 * ztot;

  auto power = [&](double eps) {
    double p = 0.0;
    for (Eigen::Index j = 0; j < lambda.size(); ++j) {
      const double l = std::max(lambda(j), 0.0) + eps;
      if (l <= null_tol) {
        if (z(j) > z_tol) return std::numeric_limits<double>::infinity();
        continue;
      }
      p += z(j) / (l * l);
    }
    return p;
  };

  if (power(0.0) <= budget) return 0.0;

  double lo = 0.0;
  // p(hi) <= ztot / hi^2 = budget, unless hi falls under the null threshold.
  double hi = std::max(std::sqrt(ztot / budget), 2.0 * null_tol);
  int doublings = 0;
  while (!(power(hi) <= budget)) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 64) fail(ErrorCode::solver, "power multiplier bisection failed to bracket");
  }
  for (int it = 0; it < max_bisect; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double p = power(mid);
    if (p <= budget) {
      hi = mid;
      if (budget - p <= 1e-10 * budget) break;
    } else {
      lo = mid;
    }
    if (hi - lo <= 1e-16 * hi) break;
  }
  return hi;
}

}  // namespace

QvProblem::QvProblem(const NetworkTopology& topology, const ChannelSet& channels,
                     const std::vector<CMatrix>& u, const std::vector<CMatrix>& w)
    : topology_(topology), users_(topology.num_users()), cells_(topology.num_cells()), w_(w) {
  channels.validate(topology);
  if (static_cast<int>(u.size()) != users_ || static_cast<int>(w.size()) != users_)
    fail(ErrorCode::shape, "U/W sets do not match the topology");
  constant_.resize(users_);
  b_.resize(static_cast<std::size_t>(users_) * cells_);
  c_.resize(b_.size());
  link_.assign(b_.size(), 0);
  for (int i = 0; i < users_; ++i) {
    const int n = topology.rx_antennas(i);
    const int d = topology.streams(i);
    if (u[i].rows() != n || u[i].cols() != d) fail(ErrorCode::shape, "receiver shape mismatch");
    if (w[i].rows() != d || w[i].cols() != d) fail(ErrorCode::shape, "weight shape mismatch");
    double ld = 0.0;
    try {
      ld = log_det_hpd(hermitian_part(w[i]));
    } catch (const Error&) {
      fail(ErrorCode::domain, "weight of user " + std::to_string(i) + " is not positive definite");
    }
    constant_[i] = w[i].trace().real() +
                   topology.noise(i) * (w[i] * (u[i].adjoint() * u[i])).trace().real() - ld - d;
    for (int l = 0; l < cells_; ++l) {
      if (channels.is_zero(i, l)) continue;
      const std::size_t s = slot(i, l);
      link_[s] = 1;
      b_[s] = channels(i, l).adjoint() * u[i];
      c_[s] = hermitian_part(b_[s] * w[i] * b_[s].adjoint());
    }
  }
}

std::vector<double> QvProblem::surrogates(const BeamformerSet& v) const {
  check_beamformers(topology_, v);
  std::vector<double> f(users_);
  for (int i = 0; i < users_; ++i) {
    double quad = 0.0;
    double lin = 0.0;
    for (int m = 0; m < users_; ++m) {
      const std::size_t s = slot(i, topology_.cell_of(m));
      if (!link_[s]) continue;
      const CMatrix t = b_[s].adjoint() * v[m];
      quad += (w_[i] * t * t.adjoint()).trace().real();
      if (m == i) lin = (w_[i] * t).trace().real();
    }
    f[i] = (constant_[i] + quad - 2.0 * lin) / std::numbers::ln2;
  }
  return f;
}

QvProblem::Inner QvProblem::minimize_weighted(std::span<const double> mu_raw,
                                              int max_bisect) const {
  if (static_cast<int>(mu_raw.size()) != users_) fail(ErrorCode::shape, "mu size mismatch");
  const double total = std::accumulate(mu_raw.begin(), mu_raw.end(), 0.0);
  if (!(total > 0.0)) fail(ErrorCode::domain, "multipliers sum to zero");
  std::vector<double> mu(mu_raw.begin(), mu_raw.end());
  for (double& x : mu) x /= total;
  Inner out;
  out.v.resize(users_);
  out.eps.assign(cells_, 0.0);
  for (int l = 0; l < cells_; ++l) {
    const int m_tx = topology_.tx_antennas(l);
    CMatrix a = CMatrix::Zero(m_tx, m_tx);
    for (int i = 0; i < users_; ++i) {
      const std::size_t s = slot(i, l);
      if (link_[s] && mu[i] > 0.0) a.noalias() += mu[i] * c_[s];
    }
    const auto members = topology_.users_in_cell(l);
    std::vector<CMatrix> rhs;
    rhs.reserve(members.size());
    for (int m : members) {
      const std::size_t s = slot(m, l);
      if (link_[s] && mu[m] > 0.0)
        rhs.push_back(mu[m] * (b_[s] * w_[m]));
      else
        rhs.push_back(CMatrix::Zero(m_tx, topology_.streams(m)));
    }

    Eigen::SelfAdjointEigenSolver<CMatrix> eig(hermitian_part(a));
    const CMatrix& q = eig.eigenvectors();
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    std::vector<CMatrix> z;
    z.reserve(rhs.size());
    Eigen::VectorXd zn = Eigen::VectorXd::Zero(m_tx);
    for (const auto& r : rhs) {
      z.push_back(q.adjoint() * r);
      zn += z.back().rowwise().squaredNorm();
    }
    const double eps = power_multiplier(lambda, zn, topology_.power(l), max_bisect);
    out.eps[l] = eps;

    const double lmax = std::max(lambda.maxCoeff(), 0.0);
    const double null_tol = 1e-13 * std::max(lmax, 1e-300);
    Eigen::VectorXd scale(m_tx);
    for (int j = 0; j < m_tx; ++j) {
      const double den = std::max(lambda(j), 0.0) + eps;
      scale(j) = den <= null_tol ? 0.0 : 1.0 / den;
    }
    for (std::size_t k = 0; k < members.size(); ++k)
      out.v[members[k]] = q * (scale.asDiagonal() * z[k]);
  }
  return out;
}

BeamformerSet weighted_v_update(const NetworkTopology& topology, const ChannelSet& channels,
                                const std::vector<CMatrix>& u, const std::vector<CMatrix>& w,
                                std::span<const double> mu, std::vector<double>* eps,
                                int max_bisect) {
  QvProblem problem(topology, channels, u, w);
  auto inner = problem.minimize_weighted(mu, max_bisect);
  if (eps) *eps = std::move(inner.eps);
  return std::move(inner.v);
}

QvSolver::QvSolver(const NetworkTopology& topology, const ChannelSet& channels,
                   const std::vector<CMatrix>& u, const std::vector<CMatrix>& w,
                   QvOptions options)
    : problem_(topology, channels, u, w), options_(options) {
  if (!(options_.tol_gap > 0.0) || options_.max_outer < 1 || !(options_.initial_step > 0.0))
    fail(ErrorCode::config, "invalid subproblem solver options");
}

QvProblem::Barrier QvProblem::solve_barrier(const BeamformerSet& start, double tol_abs,
                                            int max_newton) const {
  check_beamformers(topology_, start);
  // Stacked complex unknown z = [vec V_0; vec V_1; ...], real x = [Re z; Im z].
  std::vector<Eigen::Index> off(users_ + 1, 0);
  for (int m = 0; m < users_; ++m) off[m + 1] = off[m] + start[m].size();
  const Eigen::Index nc = off[users_];
  const Eigen::Index nx = 2 * nc;
  const Eigen::Index ny = nx + 1;
  const int constraints = users_ + cells_;

  auto unpack = [&](const Eigen::VectorXd& y) {
    BeamformerSet v(users_);
    for (int m = 0; m < users_; ++m) {
      v[m].resize(start[m].rows(), start[m].cols());
      for (Eigen::Index q = 0; q < start[m].size(); ++q)
        v[m](q) = Complex(y(off[m] + q), y(nc + off[m] + q));
    }
    return v;
  };

  struct Eval {
    BeamformerSet v;
    std::vector<double> f;
    std::vector<double> power;
    double phi = 0.0;
    bool inside = false;
  };
  auto evaluate = [&](const Eigen::VectorXd& y, double tau) {
    Eval e;
    e.v = unpack(y);
    e.f = surrogates(e.v);
    e.power = bs_powers(topology_, e.v);
    const double gamma = y(nx);
    e.phi = tau * gamma;
    for (int i = 0; i < users_; ++i) {
      const double slack = gamma - e.f[i];
      if (!(slack > 0.0)) return e;
      e.phi -= std::log(slack);
    }
    for (int k = 0; k < cells_; ++k) {
      const double slack = topology_.power(k) - e.power[k];
      if (!(slack > 0.0)) return e;
      e.phi -= std::log(slack);
    }
    e.inside = true;
    return e;
  };

  // Strictly feasible start: shrink full-power cells slightly.
  Eigen::VectorXd y(ny);
  {
    BeamformerSet v0 = start;
    const auto p0 = bs_powers(topology_, v0);
    for (int m = 0; m < users_; ++m) {
      const int k = topology_.cell_of(m);
      const double cap = (1.0 - 1e-4) * topology_.power(k);
      if (p0[k] > cap) v0[m] *= std::sqrt(cap / p0[k]);
    }
    for (int m = 0; m < users_; ++m)
      for (Eigen::Index q = 0; q < v0[m].size(); ++q) {
        y(off[m] + q) = v0[m](q).real();
        y(nc + off[m] + q) = v0[m](q).imag();
      }
    const auto f0 = surrogates(v0);
    y(nx) = *std::max_element(f0.begin(), f0.end()) + 1.0;
  }

  Barrier out;
  double tau = 1.0;
  const double ln2 = std::numbers::ln2;
  Eval cur = evaluate(y, tau);
  for (;;) {
    bool centered = false;
    while (out.newton_steps < max_newton) {
      ++out.newton_steps;
      const double gamma = y(nx);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(ny);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(ny, ny);
      grad(nx) = tau;
      // Curvature of sum_i f_i / s_i: block diagonal, one block per stream.
      std::vector<CMatrix> a(cells_);
      for (int l = 0; l < cells_; ++l)
        a[l] = CMatrix::Zero(topology_.tx_antennas(l), topology_.tx_antennas(l));
      for (int i = 0; i < users_; ++i) {
        const double si = gamma - cur.f[i];
        Eigen::VectorXd g = Eigen::VectorXd::Zero(nx);
        for (int m = 0; m < users_; ++m) {
          const int l = topology_.cell_of(m);
          const std::size_t sl = slot(i, l);
          if (!link_[sl]) continue;
          CMatrix gm = c_[sl] * cur.v[m];
          if (m == i) gm -= b_[sl] * w_[i];
          gm *= 2.0 / ln2;
          for (Eigen::Index q = 0; q < gm.size(); ++q) {
            g(off[m] + q) = gm(q).real();
            g(nc + off[m] + q) = gm(q).imag();
          }
        }
        for (int l = 0; l < cells_; ++l)
          if (link_[slot(i, l)]) a[l] += c_[slot(i, l)] / si;
        grad.head(nx) += g / si;
        grad(nx) -= 1.0 / si;
        hess.topLeftCorner(nx, nx).selfadjointView<Eigen::Lower>().rankUpdate(g, 1.0 / (si * si));
        hess.block(nx, 0, 1, nx) -= g.transpose() / (si * si);
        hess(nx, nx) += 1.0 / (si * si);
      }
      for (int m = 0; m < users_; ++m) {
        const int l = topology_.cell_of(m);
        const CMatrix blk = a[l] * (2.0 / ln2);
        const Eigen::Index mt = blk.rows();
        for (Eigen::Index col = 0; col < start[m].cols(); ++col) {
          const Eigen::Index r0 = off[m] + col * mt;
          hess.block(r0, r0, mt, mt) += blk.real();
          hess.block(nc + r0, nc + r0, mt, mt) += blk.real();
          hess.block(nc + r0, r0, mt, mt) += blk.imag();
          hess.block(r0, nc + r0, mt, mt) -= blk.imag();
        }
      }
      for (int k = 0; k < cells_; ++k) {
        const double rk = topology_.power(k) - cur.power[k];
        Eigen::VectorXd g = Eigen::VectorXd::Zero(nx);
        for (int m : topology_.users_in_cell(k))
          for (Eigen::Index q = 0; q < start[m].size(); ++q) {
            g(off[m] + q) = 2.0 * y(off[m] + q);
            g(nc + off[m] + q) = 2.0 * y(nc + off[m] + q);
            hess(off[m] + q, off[m] + q) += 2.0 / rk;
            hess(nc + off[m] + q, nc + off[m] + q) += 2.0 / rk;
          }
        grad.head(nx) += g / rk;
        hess.topLeftCorner(nx, nx).selfadjointView<Eigen::Lower>().rankUpdate(g, 1.0 / (rk * rk));
      }
      // The rank updates filled the lower triangle only; the dense blocks
      // above were written in full.
      Eigen::MatrixXd full = hess.selfadjointView<Eigen::Lower>();
      Eigen::LDLT<Eigen::MatrixXd> ldlt(full);
      Eigen::VectorXd step = ldlt.solve(-grad);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) break;
      const double decrement = -grad.dot(step);
      // phi carries tau * gamma, so the decrement only needs to be small in
      // absolute terms; its effect on gamma is decrement / tau.
      if (decrement <= 1e-8) {
        centered = true;
        break;
      }
      double t = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        Eigen::VectorXd trial = y + t * step;
        Eval e = evaluate(trial, tau);
        if (e.inside && e.phi <= cur.phi - 0.25 * t * decrement) {
          y = std::move(trial);
          cur = std::move(e);
          moved = true;
          break;
        }
      }
      if (!moved) {
        centered = decrement <= 1e-6;
        break;
      }
    }
    if (!centered) break;
    if (constraints / tau <= tol_abs) {
      out.converged = true;
      break;
    }
    tau = std::min(tau * 20.0, 1.01 * constraints / tol_abs);
    cur = evaluate(y, tau);
  }

  out.v = cur.v;
  out.gamma = *std::max_element(cur.f.begin(), cur.f.end());
  out.lower_bound = out.converged ? y(nx) - constraints / tau
                                  : -std::numeric_limits<double>::infinity();
  out.mu.resize(users_);
  double total = 0.0;
  for (int i = 0; i < users_; ++i) total += (out.mu[i] = 1.0 / (tau * (y(nx) - cur.f[i])));
  for (double& x : out.mu) x /= total;
  return out;
}

QvSolution QvSolver::solve(const BeamformerSet* incoming, std::span<const double> warm_mu) {
  const int users = problem_.topology().num_users();
  if (incoming) check_beamformers(problem_.topology(), *incoming);

  std::vector<double> mu(users, 1.0 / users);
  if (!warm_mu.empty()) {
    if (static_cast<int>(warm_mu.size()) != users) fail(ErrorCode::shape, "warm mu size mismatch");
    double s = 0.0;
    for (int i = 0; i < users; ++i) s += (mu[i] = std::max(warm_mu[i], options_.mu_floor));
    for (double& x : mu) x /= s;
  }

  struct Point {
    std::vector<double> mu;
    QvProblem::Inner inner;
    std::vector<double> f;
    double dual = 0.0;    // Lagrangian value at mu, a lower bound
    double primal = 0.0;  // max f at the inner minimizer
  };
  auto evaluate = [&](std::vector<double> m) {
    Point p;
    p.inner = problem_.minimize_weighted(m, options_.max_bisect);
    p.f = problem_.surrogates(p.inner.v);
    const double total = std::accumulate(m.begin(), m.end(), 0.0);
    for (double& x : m) x /= total;
    p.dual = std::inner_product(m.begin(), m.end(), p.f.begin(), 0.0);
    p.primal = *std::max_element(p.f.begin(), p.f.end());
    p.mu = std::move(m);
    return p;
  };

  // Every evaluated point gives a feasible V (upper bound) and a dual value
  // (lower bound); keep the best of each.
  BeamformerSet best_v;
  std::vector<double> best_f;
  double best_primal = std::numeric_limits<double>::infinity();
  std::vector<double> best_mu;
  std::vector<double> best_eps;
  double best_dual = -std::numeric_limits<double>::infinity();
  auto record = [&](const Point& p) {
    if (p.primal < best_primal) {
      best_primal = p.primal;
      best_v = p.inner.v;
      best_f = p.f;
    }
    if (p.dual > best_dual) {
      best_dual = p.dual;
      best_mu = p.mu;
      best_eps = p.inner.eps;
    }
  };
  auto closed = [&] {
    return best_primal - best_dual <= options_.tol_gap * (1.0 + std::abs(best_primal));
  };

  QvSolution sol;
  Point cur = evaluate(mu);
  record(cur);
  int it = 0;

  // Entropic mirror ascent; the step is halved when the dual decreases and
  // grown after accepted steps.
  double step = options_.initial_step;
  for (; it < options_.max_outer && !closed(); ++it) {
    if (best_primal - best_dual <= options_.newton_handoff * (1.0 + std::abs(best_primal))) break;
    const double fmax = cur.primal;
    std::vector<double> next(users);
    for (int i = 0; i < users; ++i)
      next[i] = std::max(cur.mu[i], options_.mu_floor) * std::exp(step * (cur.f[i] - fmax));
    Point cand = evaluate(std::move(next));
    record(cand);
    if (cand.dual >= cur.dual) {
      cur = std::move(cand);
      step *= 1.5;
    } else {
      step *= 0.5;
      if (step < options_.min_step) break;
    }
  }

  // Newton on f_F(mu) = gamma over the free set F, in log-multiplier
  // coordinates. Users clearly below the level have zero multipliers at
  // the optimum and are shrunk geometrically. f is homogeneous of degree
  // zero in mu; its Jacobian is taken by forward differences.
  if (cur.dual < best_dual) cur = evaluate(best_mu);
  for (int nit = 0; nit < options_.max_newton && it < options_.max_outer && !closed(); ++nit) {
    const double merit = cur.primal - cur.dual;
    std::vector<int> free;
    std::vector<int> slack;
    for (int i = 0; i < users; ++i)
      (cur.f[i] < cur.dual - 100.0 * merit - 1e-12 ? slack : free).push_back(i);
    const auto n = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
    for (Eigen::Index c = 0; c < n; ++c) {
      std::vector<double> probe = cur.mu;
      probe[free[c]] *= 1.0 + options_.fd_step;
      const auto fp = problem_.surrogates(problem_.minimize_weighted(probe, options_.max_bisect).v);
      for (Eigen::Index r = 0; r < n; ++r)
        sys(r, c) = (fp[free[r]] - cur.f[free[r]]) / options_.fd_step;
    }
    it += static_cast<int>(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      sys(r, n) = -1.0;
      sys(n, r) = cur.mu[free[r]];
      rhs(r) = -cur.f[free[r]];
    }
    const Eigen::VectorXd dir = sys.colPivHouseholderQr().solve(rhs);
    if (!dir.allFinite()) break;

    const double longest = dir.head(n).cwiseAbs().maxCoeff();
    double t = std::min(1.0, options_.max_log_step / std::max(longest, 1e-300));
    bool moved = false;
    for (int ls = 0; ls < 20; ++ls, t *= 0.5) {
      std::vector<double> trial = cur.mu;
      for (Eigen::Index c = 0; c < n; ++c) trial[free[c]] *= std::exp(t * dir(c));
      for (int i : slack) trial[i] *= std::exp(-options_.max_log_step);
      for (double& x : trial) x = std::max(x, 1e-300);
      Point cand = evaluate(std::move(trial));
      ++it;
      record(cand);
      if (cand.primal - cand.dual < merit) {
        cur = std::move(cand);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  // Degenerate subproblems (a multiplier at zero whose user's beamformer is
  // not pinned by the Lagrangian) defeat primal recovery from the dual;
  // finish those on the primal side.
  if (!closed() && options_.barrier_fallback) {
    const double tol_abs = 0.5 * options_.tol_gap * (1.0 + std::abs(best_primal));
    auto bar = problem_.solve_barrier(best_v, tol_abs, options_.max_barrier_newton);
    sol.used_barrier = true;
    it += bar.newton_steps;
    if (bar.gamma < best_primal) {
      best_primal = bar.gamma;
      best_v = std::move(bar.v);
      best_f = problem_.surrogates(best_v);
    }
    Point at = evaluate(bar.mu);
    record(at);
    if (bar.lower_bound > best_dual) {
      best_dual = bar.lower_bound;
      best_mu = at.mu;
      best_eps = at.inner.eps;
    }
  }

  sol.iterations = it;
  sol.converged = closed();
  sol.v = std::move(best_v);
  sol.surrogates = std::move(best_f);
  sol.gamma = best_primal;
  sol.dual_value = best_dual;
  sol.dual.mu = std::move(best_mu);
  sol.dual.eps = std::move(best_eps);
  sol.dual.gap = sol.gamma - sol.dual_value;

  if (incoming) {
    auto f_in = problem_.surrogates(*incoming);
    const double g_in = *std::max_element(f_in.begin(), f_in.end());
    if (g_in < sol.gamma) {
      sol.v = *incoming;
      sol.surrogates = std::move(f_in);
      sol.gamma = g_in;
      sol.dual.gap = g_in - sol.dual_value;
      sol.kept_incoming = true;
    }
  }
  return sol;
}

QvSolution solve_qv(const NetworkTopology& topology, const ChannelSet& channels,
                    const std::vector<CMatrix>& u, const std::vector<CMatrix>& w,
                    const QvOptions& options, const BeamformerSet* incoming,
                    std::span<const double> warm_mu) {
  QvSolver solver(topology, channels, u, w, options);
  return solver.solve(incoming, warm_mu);
}

}  // namespace mmfair
