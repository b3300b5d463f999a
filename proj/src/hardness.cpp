#include "mmfair/hardness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "parallel.hpp"

namespace mmfair {

namespace {

using std::numbers::pi;
constexpr Complex kJ{0.0, 1.0};

CMatrix mat2(Complex a, Complex b, Complex c, Complex d) {
  CMatrix m(2, 2);
  m << a, b, c, d;
  return m;
}

NetworkTopology pairs(int k) {
  return NetworkTopology::uniform(k, 1, 2, 2, 1, 1.0, 1.0);
}

// Entries of the first three users; offset is the global index of user 1.
void set_lemma1_block(ChannelSet& ch, int offset) {
  const CMatrix direct = CMatrix::Identity(2, 2);
  const CMatrix cross = mat2(0, 2, 2, 0);
  for (int i = 0; i < 3; ++i)
    for (int m = 0; m < 3; ++m) ch.set(offset + i, offset + m, i == m ? direct : cross);
}

void set_lemma2_block(ChannelSet& ch, int offset) {
  set_lemma1_block(ch, offset);
  const CMatrix direct = mat2(2, 0, 0, 0);
  const CMatrix to4 = mat2(1, kJ, 0, 0);
  const CMatrix to5 = mat2(kJ, 1, 0, 0);
  ch.set(offset + 3, offset + 3, direct);
  ch.set(offset + 4, offset + 4, direct);
  for (int m = 0; m < 3; ++m) {
    ch.set(offset + 3, offset + m, to4);
    ch.set(offset + 4, offset + m, to5);
  }
}

double det2(const Eigen::Matrix2cd& a) {
  return (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)).real();
}

// Fixed-size rate evaluation for networks of 2x2 pairs with unit noise:
// cross[k][m][c] = H_km Q_c H_km^H for candidate covariance c.
struct PairRates {
  int users = 0;
  std::vector<std::vector<std::vector<Eigen::Matrix2cd>>> cross;

  PairRates(const Network& net, const std::vector<CMatrix>& candidates) {
    users = net.topology.num_users();
    cross.assign(users, std::vector<std::vector<Eigen::Matrix2cd>>(users));
    for (int k = 0; k < users; ++k)
      for (int m = 0; m < users; ++m) {
        const CMatrix& h = net.channels(k, m);
        for (const CMatrix& q : candidates)
          cross[k][m].push_back(Eigen::Matrix2cd(h * q * h.adjoint()));
      }
  }

  double rate(int k, const int* choice) const {
    Eigen::Matrix2cd j = Eigen::Matrix2cd::Identity();
    for (int m = 0; m < users; ++m)
      if (m != k) j += cross[k][m][choice[m]];
    const double r = std::log2(det2(j + cross[k][k][choice[k]]) / det2(j));
    return std::max(r, 0.0);
  }

  double min_rate(const int* choice) const {
    double r = std::numeric_limits<double>::infinity();
    for (int k = 0; k < users; ++k) r = std::min(r, rate(k, choice));
    return r;
  }
};

std::vector<double> linspace(int n, double hi) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? 0.0 : hi * i / (n - 1);
  return v;
}

std::vector<double> periodic(int n, double period) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = period * i / n;
  return v;
}

std::vector<CMatrix> covariance_grid(int na, int nphi, int npsi) {
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(na) * nphi * npsi);
  for (double a : linspace(na, 1.0))
    for (double phi : linspace(nphi, pi))
      for (double psi : periodic(npsi, 2.0 * pi)) out.push_back(lemma1_covariance(a, phi, psi));
  return out;
}

}  // namespace

Network build_lemma1_network() {
  Network net{pairs(3), ChannelSet(pairs(3))};
  set_lemma1_block(net.channels, 0);
  return net;
}

Network build_lemma2_network() {
  Network net{pairs(5), ChannelSet(pairs(5))};
  set_lemma2_block(net.channels, 0);
  return net;
}

CMatrix q_a() { return mat2(1, 0, 0, 0); }
CMatrix q_b() { return mat2(0, 0, 0, 1); }
CMatrix q_c() { return 0.5 * mat2(1, kJ, -kJ, 1); }
CMatrix q_d() { return 0.5 * mat2(1, -kJ, kJ, 1); }

double f_value(const FairnessPoint& p) {
  const double ga = 1.0 / (1.0 + 4.0 * p.alpha);
  const double gb = 1.0 / (1.0 + 4.0 * p.beta);
  const double t = p.theta;
  const double s = 1.0 + t * p.x * ga + t * (1.0 - p.x) * gb + (1.0 - t) * (1.0 - p.x) * ga +
                   (1.0 - t) * p.x * gb + t * (1.0 - t) * ga * gb;
  return std::log2(s);
}

FGridReport maximize_f_grid(int points, double value_tol) {
  if (points < 2) fail(ErrorCode::config, "f grid needs at least 2 points per axis");
  FGridReport rep;
  rep.points = points;
  rep.cell = 1.0 / (points - 1);
  const auto axis = linspace(points, 1.0);
  rep.best = -std::numeric_limits<double>::infinity();
  for (double x : axis)
    for (double t : axis)
      for (double a : axis) rep.best = std::max(rep.best, f_value({t, a, 1.0 - a, x}));
  for (double x : axis)
    for (double t : axis)
      for (double a : axis) {
        FairnessPoint p{t, a, 1.0 - a, x};
        if (f_value(p) >= rep.best - value_tol) rep.maximizers.push_back(p);
      }
  return rep;
}

CMatrix lemma1_covariance(double alpha, double phi, double psi) {
  Eigen::Vector2cd a(std::cos(phi), std::sin(phi) * std::exp(kJ * psi));
  Eigen::Vector2cd b(-std::conj(a(1)), std::conj(a(0)));
  return alpha * (a * a.adjoint()) + (1.0 - alpha) * (b * b.adjoint());
}

Lemma1Report verify_lemma1(const Lemma1GridOptions& o) {
  if (o.coarse_points < 2 || o.fine_alpha < 2 || o.fine_phi < 2 || o.fine_psi < 1)
    fail(ErrorCode::config, "lemma 1 grid too small");
  const Network net = build_lemma1_network();
  Lemma1Report rep;

  // Coarse: every combination of three independent covariances.
  {
    const auto cand = covariance_grid(o.coarse_points, o.coarse_points, o.coarse_points);
    const PairRates eval(net, cand);
    const auto nc = static_cast<std::int64_t>(cand.size());
    std::vector<double> chunk_best(64, -1.0);
    detail::parallel_chunks(nc, 64, o.threads, [&](int c, std::int64_t b, std::int64_t e) {
      double best = -1.0;
      int choice[3];
      for (std::int64_t i = b; i < e; ++i) {
        choice[0] = static_cast<int>(i);
        for (int j = 0; j < nc; ++j) {
          choice[1] = j;
          for (int k = 0; k < nc; ++k) {
            choice[2] = k;
            best = std::max(best, eval.min_rate(choice));
          }
        }
      }
      chunk_best[c] = best;
    });
    rep.coarse_best = *std::max_element(chunk_best.begin(), chunk_best.end());
    rep.evaluations += nc * nc * nc;
  }

  // Fine: symmetric subspace Q1 = Q2 = Q3.
  const auto cand = covariance_grid(o.fine_alpha, o.fine_phi, o.fine_psi);
  const PairRates eval(net, cand);
  const auto nc = static_cast<std::int64_t>(cand.size());
  std::vector<double> value(nc);
  detail::parallel_chunks(nc, 64, o.threads, [&](int, std::int64_t b, std::int64_t e) {
    for (std::int64_t i = b; i < e; ++i) {
      const int choice[3] = {static_cast<int>(i), static_cast<int>(i), static_cast<int>(i)};
      value[i] = eval.min_rate(choice);
    }
  });
  rep.evaluations += nc;
  rep.fine_best = *std::max_element(value.begin(), value.end());
  rep.best = std::max(rep.coarse_best, rep.fine_best);

  const double da = 1.0 / (o.fine_alpha - 1);
  const double dphi = pi / (o.fine_phi - 1);
  const double dpsi = 2.0 * pi / o.fine_psi;
  rep.grid_resolution = std::max({da, dphi / pi, dpsi / (2.0 * pi)});
  // Q moves by at most sqrt(2) per unit step of alpha, phi or psi.
  rep.tol_grid = std::sqrt(2.0) * o.cells_tol * (da + dphi + dpsi);

  // Near-max points snap to a target first; the rest are clustered greedily.
  const CMatrix targets[4] = {q_a(), q_b(), q_c(), q_d()};
  bool found[4] = {false, false, false, false};
  std::vector<CMatrix> others;
  for (std::int64_t i = 0; i < nc; ++i) {
    if (value[i] < rep.fine_best - o.value_tol) continue;
    const CMatrix& q = cand[i];
    ++rep.near_max_points;
    if (std::abs(q(0, 1).real()) > 1e-9 || std::abs(det2(Eigen::Matrix2cd(q))) > 1e-9)
      rep.circle_family = false;
    bool snapped = false;
    for (int t = 0; t < 4 && !snapped; ++t)
      if ((q - targets[t]).norm() <= rep.tol_grid) snapped = found[t] = true;
    if (snapped) continue;
    bool seen = false;
    for (const CMatrix& r : others)
      if ((q - r).norm() <= rep.tol_grid) {
        seen = true;
        break;
      }
    if (!seen) others.push_back(q);
  }
  for (int t = 0; t < 4; ++t)
    if (found[t]) {
      rep.maximizers.push_back(targets[t]);
      rep.matched.push_back(t);
    }
  for (const CMatrix& q : others) {
    rep.maximizers.push_back(q);
    rep.matched.push_back(-1);
  }

  {
    const std::vector<CMatrix> half{0.5 * CMatrix::Identity(2, 2)};
    const int choice[3] = {0, 0, 0};
    rep.interior_rate = PairRates(net, half).min_rate(choice);
  }

  rep.inconclusive = rep.best < 1.0 - 2.0 * rep.grid_resolution;
  const bool all_matched = !rep.matched.empty() && others.empty();
  rep.pass = !rep.inconclusive && std::abs(rep.best - 1.0) <= rep.grid_resolution &&
             rep.coarse_best <= 1.0 + 1e-9 && all_matched &&
             std::all_of(std::begin(found), std::end(found), [](bool f) { return f; }) &&
             rep.interior_rate < 1.0;
  return rep;
}

Lemma2Report verify_lemma2() {
  const Network net = build_lemma2_network();
  Lemma2Report rep;
  auto run = [&](std::string label, std::vector<CMatrix> q, bool optimal) {
    Lemma2Check c;
    c.label = std::move(label);
    c.expect_optimal = optimal;
    c.rates = user_rates(net.topology, net.channels, CovarianceSet{q});
    c.min_rate = *std::min_element(c.rates.begin(), c.rates.end());
    c.pass = optimal ? std::abs(c.min_rate - 1.0) <= 1e-9 : c.min_rate < 1.0 - 1e-3;
    rep.checks.push_back(std::move(c));
  };

  const std::vector<CMatrix> all_a(5, q_a());
  std::vector<CMatrix> b_block(5, q_a());
  for (int i = 0; i < 3; ++i) b_block[i] = q_b();
  run("users 1-5 on e1", all_a, true);
  run("users 1-3 on e2, users 4-5 on e1", b_block, true);

  const std::pair<const char*, CMatrix> subs[2] = {{"Qc", q_c()}, {"Qd", q_d()}};
  for (const auto& [name, q] : subs) {
    std::vector<CMatrix> s(5, q_a());
    for (int i = 0; i < 3; ++i) s[i] = q;
    run(fmt::format("users 1-3 on {}", name), s, false);
  }
  const std::pair<const char*, const std::vector<CMatrix>*> bases[2] = {{"e1 point", &all_a},
                                                                        {"e2 point", &b_block}};
  for (const auto& [base_name, base] : bases)
    for (int u = 0; u < 5; ++u)
      for (const auto& [name, q] : subs) {
        std::vector<CMatrix> s = *base;
        s[u] = q;
        run(fmt::format("{}, user {} on {}", base_name, u + 1, name), s, false);
      }
  rep.pass = std::all_of(rep.checks.begin(), rep.checks.end(),
                         [](const Lemma2Check& c) { return c.pass; });
  return rep;
}

// ---------------------------------------------------------------------------

void validate(const CnfFormula& f) {
  if (f.n < 0) fail(ErrorCode::input, "negative variable count");
  for (std::size_t j = 0; j < f.clauses.size(); ++j) {
    const auto& c = f.clauses[j];
    if (c.size() != 3)
      fail(ErrorCode::input, fmt::format("clause {} has {} literals, expected 3", j + 1, c.size()));
    for (const Literal& l : c)
      if (l.var < 1 || l.var > f.n)
        fail(ErrorCode::input, fmt::format("clause {}: variable {} outside 1..{}", j + 1, l.var, f.n));
  }
}

CnfFormula parse_dimacs(std::istream& in) {
  CnfFormula f;
  bool header = false;
  long declared = 0;
  std::vector<Literal> pending;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;
    if (tok == "c") continue;
    if (tok == "%") break;
    if (tok == "p") {
      std::string fmt_tag;
      long n = -1, m = -1;
      if (header || !(ss >> fmt_tag >> n >> m) || fmt_tag != "cnf" || n < 0 || m < 0)
        fail(ErrorCode::input, fmt::format("line {}: bad problem line", lineno));
      header = true;
      f.n = static_cast<int>(n);
      declared = m;
      continue;
    }
    if (!header) fail(ErrorCode::input, fmt::format("line {}: clause before header", lineno));
    ss.clear();
    ss.str(line);
    long lit = 0;
    while (ss >> lit) {
      if (lit == 0) {
        if (pending.size() != 3)
          fail(ErrorCode::input, fmt::format("line {}: clause of length {}, expected 3", lineno,
                                             pending.size()));
        f.clauses.push_back(pending);
        pending.clear();
        continue;
      }
      const long var = std::labs(lit);
      if (var > f.n)
        fail(ErrorCode::input, fmt::format("line {}: variable {} exceeds {}", lineno, var, f.n));
      pending.push_back({static_cast<int>(var), lit < 0});
    }
    if (!ss.eof()) fail(ErrorCode::input, fmt::format("line {}: unexpected token", lineno));
  }
  if (!header) fail(ErrorCode::input, "missing 'p cnf' header");
  if (!pending.empty()) fail(ErrorCode::input, "last clause is not terminated by 0");
  if (static_cast<long>(f.clauses.size()) != declared)
    fail(ErrorCode::input,
         fmt::format("header declares {} clauses, found {}", declared, f.clauses.size()));
  return f;
}

CnfFormula read_dimacs(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  return parse_dimacs(in);
}

void write_dimacs(std::ostream& out, const CnfFormula& f) {
  out << "p cnf " << f.n << ' ' << f.clauses.size() << '\n';
  for (const auto& c : f.clauses) {
    for (const Literal& l : c) out << (l.negated ? -l.var : l.var) << ' ';
    out << "0\n";
  }
}

ClauseGain parse_clause_gain(const std::string& name) {
  if (name == "sqrt3") return ClauseGain::sqrt3;
  if (name == "one") return ClauseGain::one;
  fail(ErrorCode::config, "clause gain must be sqrt3 or one, got '" + name + "'");
}

std::string to_string(ClauseGain gain) { return gain == ClauseGain::sqrt3 ? "sqrt3" : "one"; }

std::string UserLabel::name() const {
  if (kind == clause) return fmt::format("C{}", index);
  return fmt::format("X{}_{}", role, index);
}

IcInstance build_3sat_instance(const CnfFormula& formula, ClauseGain gain) {
  validate(formula);
  const int n = formula.n;
  const int m = static_cast<int>(formula.clauses.size());
  if (5 * n + m == 0) fail(ErrorCode::input, "formula has no variables and no clauses");
  const NetworkTopology topo = pairs(5 * n + m);
  IcInstance inst{Network{topo, ChannelSet(topo)}, {}, n, m, gain};
  for (int i = 1; i <= n; ++i) {
    set_lemma2_block(inst.network.channels, inst.variable_user(i, 1));
    for (int r = 1; r <= 5; ++r) inst.labels.push_back({UserLabel::variable, i, r});
  }
  const double g = gain == ClauseGain::sqrt3 ? std::sqrt(3.0) : 1.0;
  for (int j = 1; j <= m; ++j) {
    const int cu = inst.clause_user(j);
    inst.labels.push_back({UserLabel::clause, j, 0});
    inst.network.channels.set(cu, cu, mat2(g, 0, 0, 0));
    std::vector<int> pos(n + 1, 0), neg(n + 1, 0);
    for (const Literal& l : formula.clauses[j - 1]) ++(l.negated ? neg : pos)[l.var];
    for (int i = 1; i <= n; ++i) {
      if (pos[i] == 0 && neg[i] == 0) continue;
      inst.network.channels.set(cu, inst.variable_user(i, 1),
                                mat2(std::sqrt(double(pos[i])), std::sqrt(double(neg[i])), 0, 0));
    }
  }
  return inst;
}

CovarianceSet assignment_covariances(const IcInstance& inst, const std::vector<bool>& x) {
  if (static_cast<int>(x.size()) != inst.n)
    fail(ErrorCode::input, fmt::format("assignment has {} values, expected {}", x.size(), inst.n));
  CovarianceSet q{std::vector<CMatrix>(5 * inst.n + inst.m, q_a())};
  for (int i = 1; i <= inst.n; ++i)
    if (x[i - 1])
      for (int r = 1; r <= 3; ++r) q.q[inst.variable_user(i, r)] = q_b();
  return q;
}

double evaluate_assignment(const IcInstance& inst, const std::vector<bool>& x) {
  return min_rate(inst.network.topology, inst.network.channels, assignment_covariances(inst, x));
}

SatCheck brute_force_sat_check(const IcInstance& inst, int threads) {
  if (inst.n > kMaxBruteForceVars)
    fail(ErrorCode::budget,
         fmt::format("{} variables exceed the enumeration budget of {}", inst.n, kMaxBruteForceVars));
  const std::int64_t total = std::int64_t{1} << inst.n;
  const int chunks = static_cast<int>(std::min<std::int64_t>(total, 256));
  std::vector<double> best(chunks, -1.0);
  std::vector<std::int64_t> arg(chunks, 0);
  detail::parallel_chunks(total, chunks, threads, [&](int c, std::int64_t b, std::int64_t e) {
    std::vector<bool> x(inst.n);
    for (std::int64_t mask = b; mask < e; ++mask) {
      for (int i = 0; i < inst.n; ++i) x[i] = (mask >> i) & 1;
      const double r = evaluate_assignment(inst, x);
      if (r > best[c]) {
        best[c] = r;
        arg[c] = mask;
      }
    }
  });
  SatCheck out;
  int pick = 0;
  for (int c = 1; c < chunks; ++c)
    if (best[c] > best[pick]) pick = c;
  out.best_min_rate = best[pick];
  out.best_assignment.resize(inst.n);
  for (int i = 0; i < inst.n; ++i) out.best_assignment[i] = (arg[pick] >> i) & 1;
  out.satisfiable = out.best_min_rate >= 1.0 - 1e-9;
  out.evaluated = static_cast<std::uint64_t>(total);
  return out;
}

bool satisfies(const CnfFormula& f, const std::vector<bool>& x) {
  for (const auto& c : f.clauses) {
    bool sat = false;
    for (const Literal& l : c) sat = sat || (x.at(l.var - 1) != l.negated);
    if (!sat) return false;
  }
  return true;
}

}  // namespace mmfair
