#pragma once

// Channel gadgets from the hardness argument, the 3-SAT to interference
// channel reduction, and brute-force checks of their numeric claims.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmfair/model.hpp"

namespace mmfair {

struct Network {
  NetworkTopology topology;
  ChannelSet channels;
};

/// Three 2x2 pairs, H_ii = I, H_im = [[0,2],[2,0]], unit noise and power.
Network build_lemma1_network();
/// The three users above plus users 4 and 5 with H_44 = H_55 = [[2,0],[0,0]],
/// H_4m = [[1,j],[0,0]] and H_5m = [[j,1],[0,0]] for m = 1..3.
Network build_lemma2_network();

/// Rank-one covariances e1 e1^H, e2 e2^H, 1/2 [[1,j],[-j,1]], 1/2 [[1,-j],[j,1]].
CMatrix q_a();
CMatrix q_b();
CMatrix q_c();
CMatrix q_d();

// ---------------------------------------------------------------------------
// Appendix-style scalar function

struct FairnessPoint {
  double theta = 0.0;
  double alpha = 0.0;
  double beta = 1.0;
  double x = 1.0;
};

/// log2 of 1 + theta x/(1+4a) + theta(1-x)/(1+4b) + (1-theta)(1-x)/(1+4a)
///   + (1-theta) x/(1+4b) + theta(1-theta)/((1+4a)(1+4b)).
/// With x = 1 this is f(theta, alpha, beta).
double f_value(const FairnessPoint& p);

struct FGridReport {
  int points = 200;
  double best = 0.0;
  std::vector<FairnessPoint> maximizers;  // grid points within value_tol of best
  double cell = 0.0;
};

/// Inclusive grid over theta, alpha (beta = 1 - alpha) and x.
FGridReport maximize_f_grid(int points = 200, double value_tol = 1e-9);

// ---------------------------------------------------------------------------
// Lemma checks

struct Lemma1GridOptions {
  int coarse_points = 5;  // per parameter, full three-user grid
  int fine_alpha = 101;   // symmetric subspace Q1 = Q2 = Q3
  int fine_phi = 101;
  int fine_psi = 128;
  double value_tol = 1e-6;   // near-max threshold for the argmax set
  double cells_tol = 2.0;    // maximizer match radius in grid cells
  int threads = 0;           // 0 = hardware concurrency
};

struct Lemma1Report {
  double coarse_best = 0.0;
  double fine_best = 0.0;
  double best = 0.0;
  double grid_resolution = 0.0;
  double tol_grid = 0.0;                 // matrix (Frobenius) match radius
  std::vector<CMatrix> maximizers;       // one representative per cluster
  std::vector<int> matched;              // index into {Q_a, Q_b, Q_c, Q_d}, -1 if none
  long long near_max_points = 0;
  // Every near-max point is rank one with Re Q_12 = 0, i.e. a = [cos, +-j sin]
  // up to phase; such a is orthogonal to its cross-channel image.
  bool circle_family = true;
  double interior_rate = 0.0;            // symmetric Q = I/2
  long long evaluations = 0;
  bool inconclusive = false;
  bool pass = false;
};

/// Q = alpha a a^H + (1 - alpha) b b^H with a = [cos phi, sin phi e^{j psi}]
/// and b orthogonal to a.
CMatrix lemma1_covariance(double alpha, double phi, double psi);

Lemma1Report verify_lemma1(const Lemma1GridOptions& options = {});

struct Lemma2Check {
  std::string label;
  std::vector<double> rates;
  double min_rate = 0.0;
  bool expect_optimal = false;  // min rate should be 1
  bool pass = false;
};

struct Lemma2Report {
  std::vector<Lemma2Check> checks;
  bool pass = false;
};

/// The two optimal points (users 1-3 on e1 or e2, users 4-5 always on e1,
/// their direct channel has no second column), Q_c / Q_d substituted for
/// users 1-3, and every single-user substitution of Q_c / Q_d.
Lemma2Report verify_lemma2();

// ---------------------------------------------------------------------------
// 3-SAT reduction

struct Literal {
  int var = 1;  // 1-based
  bool negated = false;
};

struct CnfFormula {
  int n = 0;
  std::vector<std::vector<Literal>> clauses;
};

/// Checks clause lengths and variable ranges; throws ErrorCode::input.
void validate(const CnfFormula& formula);

/// DIMACS CNF: comment lines, `p cnf n m`, clauses terminated by 0.
/// Throws ErrorCode::input on malformed input or a clause length != 3.
CnfFormula parse_dimacs(std::istream& in);
CnfFormula read_dimacs(const std::string& path);
void write_dimacs(std::ostream& out, const CnfFormula& formula);

enum class ClauseGain {
  sqrt3,  // H_CC = [[sqrt 3, 0], [0, 0]]
  one,    // H_CC = [[1, 0], [0, 0]], fails the satisfiable direction
};

ClauseGain parse_clause_gain(const std::string& name);
std::string to_string(ClauseGain gain);

struct UserLabel {
  enum Kind { variable, clause } kind = variable;
  int index = 0;  // variable 1..n or clause 1..m
  int role = 0;   // 1..5 inside a variable gadget, 0 for clause users
  std::string name() const;
};

struct IcInstance {
  Network network;
  std::vector<UserLabel> labels;
  int n = 0;
  int m = 0;
  ClauseGain gain = ClauseGain::sqrt3;

  int variable_user(int var, int role) const { return 5 * (var - 1) + role - 1; }
  int clause_user(int clause) const { return 5 * n + clause - 1; }
};

/// One five-user gadget per variable and one user per clause, all single
/// pairs. The channel from X_1i to C_j is [[sqrt p, sqrt q], [0, 0]] where p
/// and q count the occurrences of x_i and its negation in c_j.
IcInstance build_3sat_instance(const CnfFormula& formula, ClauseGain gain = ClauseGain::sqrt3);

/// false -> users X_1i..X_3i on e1, true -> on e2; X_4i, X_5i and the clause
/// users always on e1, all at full power.
CovarianceSet assignment_covariances(const IcInstance& instance, const std::vector<bool>& x);
double evaluate_assignment(const IcInstance& instance, const std::vector<bool>& x);

inline constexpr int kMaxBruteForceVars = 20;

struct SatCheck {
  std::vector<bool> best_assignment;
  double best_min_rate = 0.0;
  bool satisfiable = false;  // best >= 1 - 1e-9
  std::uint64_t evaluated = 0;
};

/// Max of evaluate_assignment over all 2^n assignments. Throws
/// ErrorCode::budget for n > kMaxBruteForceVars.
SatCheck brute_force_sat_check(const IcInstance& instance, int threads = 0);

/// Plain truth-table evaluation of the formula.
bool satisfies(const CnfFormula& formula, const std::vector<bool>& x);

}  // namespace mmfair
