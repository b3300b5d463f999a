#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "mmfair/hardness.hpp"

using namespace mmfair;
using namespace testing;

namespace {

const Complex kJ(0.0, 1.0);

CMatrix mat(Complex a, Complex b, Complex c, Complex d) {
  CMatrix m(2, 2);
  m << a, b, c, d;
  return m;
}

bool bit_equal(const CMatrix& a, const CMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

// The displayed f, typed in directly from its definition.
double f_display(double t, double a, double b) {
  return std::log2(1.0 + t / (1.0 + 4.0 * a) + (1.0 - t) / (1.0 + 4.0 * b) +
                   t * (1.0 - t) / ((1.0 + 4.0 * a) * (1.0 + 4.0 * b)));
}

CnfFormula cnf(int n, std::vector<std::vector<int>> clauses) {
  CnfFormula f;
  f.n = n;
  for (const auto& c : clauses) {
    std::vector<Literal> lits;
    for (int x : c) lits.push_back({std::abs(x), x < 0});
    f.clauses.push_back(lits);
  }
  return f;
}

CnfFormula parse(const std::string& text) {
  std::istringstream is(text);
  return parse_dimacs(is);
}

ErrorCode parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::io;  // sentinel: nothing thrown
}

std::vector<bool> bits(std::uint64_t mask, int n) {
  std::vector<bool> x(n);
  for (int i = 0; i < n; ++i) x[i] = (mask >> i) & 1;
  return x;
}

}  // namespace

TEST_CASE("three-user gadget channels are exact") {
  const auto net = build_lemma1_network();
  REQUIRE(net.topology.num_users() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(net.topology.noise(i) == 1.0);
    CHECK(net.topology.power(i) == 1.0);
    for (int m = 0; m < 3; ++m)
      CHECK(bit_equal(net.channels(i, m), i == m ? mat(1, 0, 0, 1) : mat(0, 2, 2, 0)));
  }
}

TEST_CASE("five-user gadget channels are exact") {
  const auto net = build_lemma2_network();
  REQUIRE(net.topology.num_users() == 5);
  for (int i = 0; i < 3; ++i)
    for (int m = 0; m < 3; ++m)
      CHECK(bit_equal(net.channels(i, m), i == m ? mat(1, 0, 0, 1) : mat(0, 2, 2, 0)));
  CHECK(bit_equal(net.channels(3, 3), mat(2, 0, 0, 0)));
  CHECK(bit_equal(net.channels(4, 4), mat(2, 0, 0, 0)));
  for (int m = 0; m < 3; ++m) {
    CHECK(bit_equal(net.channels(3, m), mat(1, kJ, 0, 0)));
    CHECK(bit_equal(net.channels(4, m), mat(kJ, 1, 0, 0)));
  }
  // Users 1-3 hear nothing from 4 and 5, and 4 and 5 do not hear each other.
  for (int i = 0; i < 5; ++i)
    for (int m = 3; m < 5; ++m)
      if (i != m) CHECK(net.channels.is_zero(i, m));
}

TEST_CASE("named covariances") {
  CHECK(bit_equal(q_a(), mat(1, 0, 0, 0)));
  CHECK(bit_equal(q_b(), mat(0, 0, 0, 1)));
  CHECK((q_c() - mat(0.5, 0.5 * kJ, -0.5 * kJ, 0.5)).norm() == 0.0);
  CHECK((q_d() - mat(0.5, -0.5 * kJ, 0.5 * kJ, 0.5)).norm() == 0.0);
  // Each is a a^H for the listed unit vectors.
  Eigen::Vector2cd c(std::sqrt(0.5) * kJ, std::sqrt(0.5));
  Eigen::Vector2cd d(std::sqrt(0.5), std::sqrt(0.5) * kJ);
  CHECK((CMatrix(c * c.adjoint()) - q_c()).norm() < 1e-15);
  CHECK((CMatrix(d * d.adjoint()) - q_d()).norm() < 1e-15);
}

TEST_CASE("three-user gadget rates") {
  const auto net = build_lemma1_network();
  for (const CMatrix& q : {q_a(), q_b(), q_c(), q_d()})
    CHECK(min_rate(net.topology, net.channels, CovarianceSet{{q, q, q}}) ==
          doctest::Approx(1.0).epsilon(1e-12));
  const CMatrix half = 0.5 * CMatrix::Identity(2, 2);
  CHECK(min_rate(net.topology, net.channels, CovarianceSet{{half, half, half}}) < 1.0);
}

TEST_CASE("lemma1_covariance parameterization") {
  CHECK((lemma1_covariance(1.0, 0.0, 0.0) - q_a()).norm() < 1e-15);
  CHECK((lemma1_covariance(0.0, 0.0, 0.0) - q_b()).norm() < 1e-15);
  for (double alpha : {0.0, 0.3, 1.0})
    for (double phi : {0.1, 1.2, 2.9})
      for (double psi : {0.0, 2.0, 5.5}) {
        const CMatrix q = lemma1_covariance(alpha, phi, psi);
        CHECK(q.trace().real() == doctest::Approx(1.0));
        Eigen::SelfAdjointEigenSolver<CMatrix> es(q);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
      }
}

TEST_CASE("verify_lemma1 on a reduced grid") {
  Lemma1GridOptions opt;
  opt.coarse_points = 3;
  opt.fine_alpha = 21;
  opt.fine_phi = 41;
  opt.fine_psi = 64;
  const auto rep = verify_lemma1(opt);
  CHECK(rep.best == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(rep.inconclusive);
  CHECK(rep.interior_rate < 1.0);
  CHECK(rep.circle_family);
  // All four named covariances sit on grid points of this grid, so each one
  // is recovered by some cluster.
  std::vector<int> hit(4, 0);
  for (int m : rep.matched)
    if (m >= 0) hit[m] = 1;
  CHECK(hit == std::vector<int>{1, 1, 1, 1});
}

TEST_CASE("five-user gadget examples") {
  const auto net = build_lemma2_network();
  auto rates = [&](std::vector<CMatrix> q) {
    return user_rates(net.topology, net.channels, CovarianceSet{std::move(q)});
  };
  auto minimum = [](const std::vector<double>& r) { return *std::min_element(r.begin(), r.end()); };

  CHECK(std::abs(minimum(rates(std::vector<CMatrix>(5, q_a()))) - 1.0) < 1e-9);
  std::vector<CMatrix> e2(5, q_a());
  for (int i = 0; i < 3; ++i) e2[i] = q_b();
  CHECK(std::abs(minimum(rates(e2)) - 1.0) < 1e-9);
  // Users 4 and 5 have no second transmit direction at all.
  CHECK(minimum(rates(std::vector<CMatrix>(5, q_b()))) == 0.0);

  for (const CMatrix& q : {q_c(), q_d()}) {
    std::vector<CMatrix> s(5, q_a());
    for (int i = 0; i < 3; ++i) s[i] = q;
    const auto r = rates(s);
    CHECK(std::min(r[3], r[4]) < 1.0 - 1e-3);
  }
}

TEST_CASE("five-user gadget: any single Qc/Qd substitution lowers the min rate") {
  const auto net = build_lemma2_network();
  std::vector<CMatrix> e2(5, q_a());
  for (int i = 0; i < 3; ++i) e2[i] = q_b();
  for (const auto& base : {std::vector<CMatrix>(5, q_a()), e2})
    for (int u = 0; u < 5; ++u)
      for (const CMatrix& q : {q_c(), q_d()}) {
        auto s = base;
        s[u] = q;
        CAPTURE(u);
        CHECK(min_rate(net.topology, net.channels, CovarianceSet{s}) < 1.0 - 1e-3);
      }
  const auto rep = verify_lemma2();
  CHECK(rep.pass);
  CHECK(rep.checks.size() == 24);
}

TEST_CASE("f examples") {
  CHECK(f_value({0.0, 1.0, 0.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f_value({1.0, 0.0, 1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f_value({0.5, 0.5, 0.5, 1.0}) == doctest::Approx(f_display(0.5, 0.5, 0.5)).epsilon(1e-15));
  for (double t : {0.1, 0.4, 0.9})
    for (double a : {0.0, 0.25, 0.8})
      CHECK(f_value({t, a, 1.0 - a, 1.0}) == doctest::Approx(f_display(t, a, 1.0 - a)));
  // Interior critical point in theta and its closed form.
  for (double a : {0.4, 0.5, 0.6}) {
    const double b = 1.0 - a;
    const double t = (4.0 * b - 4.0 * a + 1.0) / 2.0;
    const double closed =
        std::log2(1.0 + (13.0 + 16.0 * (b - a) * (b - a)) / (4.0 * (1 + 4 * a) * (1 + 4 * b)));
    CHECK(f_display(t, a, b) == doctest::Approx(closed).epsilon(1e-14));
    CHECK(closed < 1.0);
  }
}

TEST_CASE("f grid maximizers") {
  const auto rep = maximize_f_grid(200);
  CHECK(std::abs(rep.best - 1.0) < 1e-9);
  REQUIRE_FALSE(rep.maximizers.empty());
  bool x1_first = false, x1_second = false;
  for (const auto& p : rep.maximizers) {
    const bool x1 = p.x == 1.0;
    if (x1) {
      const bool near_a = std::abs(p.theta) <= rep.cell && std::abs(p.alpha - 1.0) <= rep.cell;
      const bool near_b = std::abs(p.theta - 1.0) <= rep.cell && std::abs(p.alpha) <= rep.cell;
      CHECK((near_a || near_b));
      x1_first |= near_a;
      x1_second |= near_b;
    } else {
      CHECK(p.x == 0.0);
    }
  }
  CHECK(x1_first);
  CHECK(x1_second);
}

TEST_CASE("reduction: one variable without clauses is the five-user gadget") {
  const auto inst = build_3sat_instance(cnf(1, {}));
  const auto ref = build_lemma2_network();
  REQUIRE(inst.network.topology.num_users() == 5);
  CHECK(inst.network.topology == ref.topology);
  for (int i = 0; i < 5; ++i)
    for (int m = 0; m < 5; ++m) CHECK(bit_equal(inst.network.channels(i, m), ref.channels(i, m)));
  CHECK(evaluate_assignment(inst, {false}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(evaluate_assignment(inst, {true}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reduction layout") {
  const auto f = cnf(3, {{1, -2, 3}, {-1, 2, 2}});
  const auto inst = build_3sat_instance(f);
  CHECK(inst.network.topology.num_users() == 5 * 3 + 2);
  CHECK(inst.labels[inst.variable_user(2, 4)].name() == "X4_2");
  CHECK(inst.labels[inst.clause_user(2)].name() == "C2");
  const double r3 = std::sqrt(3.0);
  CHECK(bit_equal(inst.network.channels(inst.clause_user(1), inst.clause_user(1)),
                  mat(r3, 0, 0, 0)));
  // X_1i -> C_j: sqrt of positive and negated occurrence counts.
  CHECK(bit_equal(inst.network.channels(inst.clause_user(1), inst.variable_user(1, 1)),
                  mat(1, 0, 0, 0)));
  CHECK(bit_equal(inst.network.channels(inst.clause_user(1), inst.variable_user(2, 1)),
                  mat(0, 1, 0, 0)));
  CHECK(bit_equal(inst.network.channels(inst.clause_user(2), inst.variable_user(2, 1)),
                  mat(std::sqrt(2.0), 0, 0, 0)));
  CHECK(inst.network.channels.is_zero(inst.clause_user(2), inst.variable_user(3, 1)));
  // Different variable gadgets never see each other; clause users never
  // interfere with anyone.
  const int users = inst.network.topology.num_users();
  for (int a = 0; a < users; ++a)
    for (int b = 0; b < users; ++b) {
      if (a == b) continue;
      const auto& la = inst.labels[a];
      const auto& lb = inst.labels[b];
      if (lb.kind == UserLabel::clause) CHECK(inst.network.channels.is_zero(a, b));
      if (la.kind == UserLabel::variable && lb.kind == UserLabel::variable && la.index != lb.index)
        CHECK(inst.network.channels.is_zero(a, b));
    }

  const auto ones = build_3sat_instance(f, ClauseGain::one);
  CHECK(bit_equal(ones.network.channels(ones.clause_user(1), ones.clause_user(1)),
                  mat(1, 0, 0, 0)));
}

TEST_CASE("clause user SINR") {
  const auto inst = build_3sat_instance(cnf(3, {{1, 2, 3}}));
  const auto& net = inst.network;
  const int c = inst.clause_user(1);
  auto clause_rate = [&](std::vector<bool> x) {
    return user_rate(net.topology, net.channels, assignment_covariances(inst, x), c);
  };
  CHECK(clause_rate({true, false, false}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(clause_rate({false, false, false}) == doctest::Approx(std::log2(1.75)).epsilon(1e-12));
  CHECK(clause_rate({true, true, true}) == doctest::Approx(2.0).epsilon(1e-12));

  const auto rep = build_3sat_instance(cnf(1, {{1, 1, 1}}));
  CHECK(user_rate(rep.network.topology, rep.network.channels,
                  assignment_covariances(rep, {false}), rep.clause_user(1)) ==
        doctest::Approx(std::log2(1.75)).epsilon(1e-12));
}

TEST_CASE("evaluate_assignment examples") {
  const auto f = cnf(3, {{1, 2, 3}, {-1, -2, 3}});
  const auto inst = build_3sat_instance(f);
  CHECK(evaluate_assignment(inst, {true, false, false}) >= 1.0 - 1e-9);
  CHECK(evaluate_assignment(inst, {true, true, false}) < 1.0 - 1e-3);
  CHECK(evaluate_assignment(build_3sat_instance(cnf(2, {})), {true, false}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate_assignment(inst, {true}), Error);
}

TEST_CASE("brute_force_sat_check examples") {
  const auto sat = brute_force_sat_check(build_3sat_instance(cnf(3, {{1, 2, 3}})));
  CHECK(sat.satisfiable);
  CHECK(sat.best_min_rate >= 1.0 - 1e-9);
  CHECK(sat.evaluated == 8);

  const auto unsat = brute_force_sat_check(build_3sat_instance(cnf(1, {{1, 1, 1}, {-1, -1, -1}})));
  CHECK_FALSE(unsat.satisfiable);
  CHECK(unsat.best_min_rate < 1.0);
  CHECK(unsat.evaluated == 2);

  CHECK(brute_force_sat_check(build_3sat_instance(cnf(2, {}))).satisfiable);

  // With unit clause gain a clause that always keeps a false literal can no
  // longer reach rate 1, although the formula is a tautology.
  const auto taut = cnf(2, {{1, 2, -2}});
  CHECK(brute_force_sat_check(build_3sat_instance(taut)).satisfiable);
  CHECK_FALSE(brute_force_sat_check(build_3sat_instance(taut, ClauseGain::one)).satisfiable);

  try {
    brute_force_sat_check(build_3sat_instance(cnf(kMaxBruteForceVars + 1, {})));
    FAIL("expected a budget error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::budget);
  }
}

TEST_CASE("enumeration agrees with the truth table on every formula with n <= 2, m <= 2") {
  for (int n = 1; n <= 2; ++n) {
    std::vector<int> lits;
    for (int v = 1; v <= n; ++v) lits.insert(lits.end(), {v, -v});
    std::vector<std::vector<int>> clauses;
    for (std::size_t a = 0; a < lits.size(); ++a)
      for (std::size_t b = a; b < lits.size(); ++b)
        for (std::size_t c = b; c < lits.size(); ++c) clauses.push_back({lits[a], lits[b], lits[c]});
    std::vector<std::vector<std::vector<int>>> formulas{{}};
    for (std::size_t a = 0; a < clauses.size(); ++a) {
      formulas.push_back({clauses[a]});
      for (std::size_t b = a; b < clauses.size(); ++b) formulas.push_back({clauses[a], clauses[b]});
    }
    for (const auto& cl : formulas) {
      const auto f = cnf(n, cl);
      bool truth = false;
      for (std::uint64_t mask = 0; mask < (1u << n); ++mask) truth |= satisfies(f, bits(mask, n));
      const auto check = brute_force_sat_check(build_3sat_instance(f), 1);
      CHECK(check.satisfiable == truth);
      CHECK((check.best_min_rate >= 1.0 - 1e-9) == truth);
      if (truth) CHECK(satisfies(f, check.best_assignment));
    }
  }
}

TEST_CASE("enumeration agrees with the truth table on random 3-variable formulas") {
  auto rng = make_stream(2024, 0);
  std::uniform_int_distribution<int> var(1, 3), sign(0, 1), count(1, 6);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::vector<int>> cl(count(rng));
    for (auto& c : cl)
      for (int k = 0; k < 3; ++k) c.push_back(sign(rng) ? var(rng) : -var(rng));
    const auto f = cnf(3, cl);
    bool truth = false;
    for (std::uint64_t mask = 0; mask < 8; ++mask) truth |= satisfies(f, bits(mask, 3));
    CHECK(brute_force_sat_check(build_3sat_instance(f), 1).satisfiable == truth);
  }
}

TEST_CASE("DIMACS parsing") {
  const auto f = parse("c a comment\nc another\np cnf 3 2\n1 -2 3 0\n-1 2\n3 0\n");
  CHECK(f.n == 3);
  REQUIRE(f.clauses.size() == 2);
  CHECK(f.clauses[0][1].var == 2);
  CHECK(f.clauses[0][1].negated);
  CHECK(f.clauses[1][2].var == 3);
  CHECK(parse("p cnf 1 1\n1 1 1 0\n%\n0\n").clauses.size() == 1);

  std::ostringstream os;
  write_dimacs(os, f);
  const auto g = parse(os.str());
  REQUIRE(g.clauses.size() == f.clauses.size());
  for (std::size_t c = 0; c < f.clauses.size(); ++c)
    for (int k = 0; k < 3; ++k) {
      CHECK(g.clauses[c][k].var == f.clauses[c][k].var);
      CHECK(g.clauses[c][k].negated == f.clauses[c][k].negated);
    }

  CHECK(parse_error("1 2 3 0\n") == ErrorCode::input);                // no header
  CHECK(parse_error("p cnf 3 1\n1 2 0\n") == ErrorCode::input);       // two literals
  CHECK(parse_error("p cnf 3 1\n1 2 3 -1 0\n") == ErrorCode::input);  // four literals
  CHECK(parse_error("p cnf 2 1\n1 2 3 0\n") == ErrorCode::input);     // variable out of range
  CHECK(parse_error("p cnf 3 2\n1 2 3 0\n") == ErrorCode::input);     // clause count
  CHECK(parse_error("p cnf 3 1\n1 x 3 0\n") == ErrorCode::input);     // junk token
  CHECK(parse_error("p dnf 3 1\n1 2 3 0\n") == ErrorCode::input);
  CHECK(parse_error("p cnf 3 1\n1 2 3\n") == ErrorCode::input);       // unterminated
  CHECK_THROWS_AS(read_dimacs("/nonexistent/file.cnf"), Error);
}

TEST_CASE("clause gain names") {
  CHECK(parse_clause_gain("sqrt3") == ClauseGain::sqrt3);
  CHECK(parse_clause_gain("one") == ClauseGain::one);
  CHECK(to_string(ClauseGain::one) == "one");
  CHECK_THROWS_AS(parse_clause_gain("two"), Error);
}
