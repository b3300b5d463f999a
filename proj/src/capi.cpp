#include "mmfair/mmfair.h"

#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "mmfair/harness.hpp"
#include "mmfair/hardness.hpp"

struct mmf_config {
  mmfair::ScenarioConfig cfg;
  mutable std::string kind_name;
};

struct mmf_result {
  mmfair::ExperimentResult res;
  std::vector<std::string> files;
};

struct mmf_lemma1 {
  mmfair::Lemma1Report rep;
};

struct mmf_lemma2 {
  mmfair::Lemma2Report rep;
};

struct mmf_cnf {
  mmfair::CnfFormula formula;
};

struct mmf_instance {
  mmfair::IcInstance inst;
  std::vector<std::string> names;
};

namespace {

thread_local std::string g_last_error;

mmf_status from_code(mmfair::ErrorCode c) {
  using mmfair::ErrorCode;
  switch (c) {
    case ErrorCode::shape: return MMF_ERR_SHAPE;
    case ErrorCode::domain: return MMF_ERR_DOMAIN;
    case ErrorCode::conditioning: return MMF_ERR_CONDITIONING;
    case ErrorCode::solver: return MMF_ERR_SOLVER;
    case ErrorCode::feasibility: return MMF_ERR_FEASIBILITY;
    case ErrorCode::config: return MMF_ERR_CONFIG;
    case ErrorCode::input: return MMF_ERR_INPUT;
    case ErrorCode::budget: return MMF_ERR_BUDGET;
    case ErrorCode::io: return MMF_ERR_IO;
  }
  return MMF_ERR_INTERNAL;
}

mmf_status set_error(mmf_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <class Fn>
mmf_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return MMF_OK;
  } catch (const mmfair::Error& e) {
    return set_error(from_code(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(MMF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(MMF_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(MMF_ERR_INTERNAL, "unknown exception");
  }
}

#define MMF_REQUIRE(ptr)                                                  \
  do {                                                                    \
    if (!(ptr)) return set_error(MMF_ERR_NULL, #ptr " must not be NULL"); \
  } while (0)

template <class Fn>
mmf_status update(mmf_config* c, Fn&& fn) {
  MMF_REQUIRE(c);
  return guarded([&] {
    mmfair::ScenarioConfig next = c->cfg;
    fn(next);
    mmfair::validate(next);
    c->cfg = std::move(next);
  });
}

}  // namespace

extern "C" {

const char* mmf_version(void) { return mmfair::library_version(); }

const char* mmf_status_string(mmf_status s) {
  switch (s) {
    case MMF_OK: return "ok";
    case MMF_ERR_SHAPE: return "shape error";
    case MMF_ERR_DOMAIN: return "domain error";
    case MMF_ERR_CONDITIONING: return "conditioning error";
    case MMF_ERR_SOLVER: return "solver error";
    case MMF_ERR_FEASIBILITY: return "feasibility error";
    case MMF_ERR_CONFIG: return "config error";
    case MMF_ERR_INPUT: return "input error";
    case MMF_ERR_BUDGET: return "budget error";
    case MMF_ERR_IO: return "io error";
    case MMF_ERR_NULL: return "null argument";
    case MMF_ERR_RANGE: return "index out of range";
    case MMF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mmf_last_error(void) { return g_last_error.c_str(); }

// ---- configuration --------------------------------------------------------

mmf_status mmf_config_load(const char* path, mmf_config** out) {
  MMF_REQUIRE(path);
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new mmf_config{mmfair::load_config(path), {}}; });
}

mmf_status mmf_config_parse(const char* text, mmf_config** out) {
  MMF_REQUIRE(text);
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new mmf_config{mmfair::parse_config(text), {}}; });
}

void mmf_config_free(mmf_config* config) { delete config; }

mmf_status mmf_config_set_seed(mmf_config* c, uint64_t seed) {
  return update(c, [&](mmfair::ScenarioConfig& x) { x.seed = seed; });
}

mmf_status mmf_config_set_trials(mmf_config* c, int trials) {
  return update(c, [&](mmfair::ScenarioConfig& x) { x.trials = trials; });
}

mmf_status mmf_config_set_snr(mmf_config* c, const double* snr, size_t count) {
  if (count > 0) MMF_REQUIRE(snr);
  return update(c, [&](mmfair::ScenarioConfig& x) { x.snr_db.assign(snr, snr + count); });
}

mmf_status mmf_config_set_algorithms(mmf_config* c, const char* list) {
  MMF_REQUIRE(list);
  return update(c, [&](mmfair::ScenarioConfig& x) {
    x.algorithms.clear();
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) x.algorithms.push_back(item);
  });
}

mmf_status mmf_config_set_output(mmf_config* c, const char* prefix) {
  MMF_REQUIRE(prefix);
  return update(c, [&](mmfair::ScenarioConfig& x) { x.output = prefix; });
}

mmf_status mmf_config_set_tol(mmf_config* c, double tol) {
  return update(c, [&](mmfair::ScenarioConfig& x) { x.tol = tol; });
}

mmf_status mmf_config_set_max_iters(mmf_config* c, int max_iters) {
  return update(c, [&](mmfair::ScenarioConfig& x) { x.max_iters = max_iters; });
}

mmf_status mmf_config_set_kind(mmf_config* c, const char* kind) {
  MMF_REQUIRE(kind);
  MMF_REQUIRE(c);
  return guarded([&] {
    c->cfg.kind = mmfair::parse_experiment_kind(kind);
  });
}

const char* mmf_config_output(const mmf_config* c) { return c ? c->cfg.output.c_str() : ""; }

const char* mmf_config_kind(const mmf_config* c) {
  if (!c) return "";
  c->kind_name = mmfair::to_string(c->cfg.kind);
  return c->kind_name.c_str();
}

// ---- experiments ----------------------------------------------------------

mmf_status mmf_run(const mmf_config* c, mmf_result** out) {
  MMF_REQUIRE(c);
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new mmf_result{mmfair::run_experiment(c->cfg), {}}; });
}

mmf_status mmf_run_kkt(const mmf_config* c, mmf_result** out) {
  MMF_REQUIRE(c);
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new mmf_result{mmfair::run_kkt(c->cfg), {}}; });
}

void mmf_result_free(mmf_result* r) { delete r; }

mmf_status mmf_result_write(const mmf_config* c, mmf_result* r) {
  MMF_REQUIRE(c);
  MMF_REQUIRE(r);
  return guarded([&] { r->files = mmfair::write_outputs(c->cfg, r->res); });
}

size_t mmf_result_file_count(const mmf_result* r) { return r ? r->files.size() : 0; }

const char* mmf_result_file(const mmf_result* r, size_t i) {
  return r && i < r->files.size() ? r->files[i].c_str() : nullptr;
}

size_t mmf_result_summary_count(const mmf_result* r) { return r ? r->res.summary.size() : 0; }

mmf_status mmf_result_summary(const mmf_result* r, size_t i, mmf_summary_row* row) {
  MMF_REQUIRE(r);
  MMF_REQUIRE(row);
  if (i >= r->res.summary.size()) return set_error(MMF_ERR_RANGE, "summary index out of range");
  const auto& s = r->res.summary[i];
  *row = {s.algorithm.c_str(), s.snr_db,          s.trials,         s.mean_min_rate,
          s.mean_sum_rate,     s.p5_user_rate,    s.mean_iterations, s.converged};
  return MMF_OK;
}

mmf_status mmf_result_kkt_counts(const mmf_result* r, size_t* passed, size_t* total) {
  MMF_REQUIRE(r);
  MMF_REQUIRE(passed);
  MMF_REQUIRE(total);
  *total = r->res.kkt.size();
  *passed = 0;
  for (const auto& k : r->res.kkt) *passed += k.pass ? 1 : 0;
  return MMF_OK;
}

// ---- hardness -------------------------------------------------------------

mmf_status mmf_lemma1_run(int coarse_points, int threads, mmf_lemma1** out) {
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    mmfair::Lemma1GridOptions o;
    if (coarse_points > 0) o.coarse_points = coarse_points;
    if (threads > 0) o.threads = threads;
    *out = new mmf_lemma1{mmfair::verify_lemma1(o)};
  });
}

void mmf_lemma1_free(mmf_lemma1* r) { delete r; }

mmf_status mmf_lemma1_get_summary(const mmf_lemma1* r, mmf_lemma1_summary* s) {
  MMF_REQUIRE(r);
  MMF_REQUIRE(s);
  const auto& p = r->rep;
  bool hit[4] = {false, false, false, false};
  int unmatched = 0;
  for (int m : p.matched) {
    if (m >= 0)
      hit[m] = true;
    else
      ++unmatched;
  }
  *s = {p.best,
        p.coarse_best,
        p.fine_best,
        p.grid_resolution,
        p.tol_grid,
        p.interior_rate,
        p.evaluations,
        p.near_max_points,
        static_cast<int>(p.maximizers.size()),
        hit[0] + hit[1] + hit[2] + hit[3],
        unmatched,
        p.circle_family ? 1 : 0,
        p.inconclusive ? 1 : 0,
        p.pass ? 1 : 0};
  return MMF_OK;
}

mmf_status mmf_lemma1_maximizer(const mmf_lemma1* r, int i, double re[4], double im[4],
                                int* matched) {
  MMF_REQUIRE(r);
  MMF_REQUIRE(re);
  MMF_REQUIRE(im);
  if (i < 0 || i >= static_cast<int>(r->rep.maximizers.size()))
    return set_error(MMF_ERR_RANGE, "maximizer index out of range");
  const auto& q = r->rep.maximizers[i];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      re[2 * a + b] = q(a, b).real();
      im[2 * a + b] = q(a, b).imag();
    }
  if (matched) *matched = r->rep.matched[i];
  return MMF_OK;
}

mmf_status mmf_lemma2_run(mmf_lemma2** out) {
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new mmf_lemma2{mmfair::verify_lemma2()}; });
}

void mmf_lemma2_free(mmf_lemma2* r) { delete r; }

int mmf_lemma2_count(const mmf_lemma2* r) { return r ? static_cast<int>(r->rep.checks.size()) : 0; }

int mmf_lemma2_pass(const mmf_lemma2* r) { return r && r->rep.pass ? 1 : 0; }

mmf_status mmf_lemma2_check(const mmf_lemma2* r, int i, const char** label, double* min_rate,
                            double* rates, int* expect_optimal, int* pass) {
  MMF_REQUIRE(r);
  if (i < 0 || i >= static_cast<int>(r->rep.checks.size()))
    return set_error(MMF_ERR_RANGE, "check index out of range");
  const auto& c = r->rep.checks[i];
  if (label) *label = c.label.c_str();
  if (min_rate) *min_rate = c.min_rate;
  if (rates)
    for (std::size_t k = 0; k < c.rates.size(); ++k) rates[k] = c.rates[k];
  if (expect_optimal) *expect_optimal = c.expect_optimal ? 1 : 0;
  if (pass) *pass = c.pass ? 1 : 0;
  return MMF_OK;
}

double mmf_f_value(double theta, double alpha, double beta, double x) {
  return mmfair::f_value({theta, alpha, beta, x});
}

mmf_status mmf_f_grid(int points, double* best, double* maximizers, size_t capacity,
                      size_t* count) {
  MMF_REQUIRE(best);
  if (capacity > 0) MMF_REQUIRE(maximizers);
  return guarded([&] {
    const auto rep = mmfair::maximize_f_grid(points);
    *best = rep.best;
    if (count) *count = rep.maximizers.size();
    for (std::size_t i = 0; i < rep.maximizers.size() && i < capacity; ++i) {
      const auto& p = rep.maximizers[i];
      maximizers[4 * i] = p.theta;
      maximizers[4 * i + 1] = p.alpha;
      maximizers[4 * i + 2] = p.beta;
      maximizers[4 * i + 3] = p.x;
    }
  });
}

// ---- 3-SAT ----------------------------------------------------------------

mmf_status mmf_cnf_read(const char* path, mmf_cnf** out) {
  MMF_REQUIRE(path);
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new mmf_cnf{mmfair::read_dimacs(path)}; });
}

mmf_status mmf_cnf_parse(const char* text, mmf_cnf** out) {
  MMF_REQUIRE(text);
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    std::istringstream in(text);
    *out = new mmf_cnf{mmfair::parse_dimacs(in)};
  });
}

void mmf_cnf_free(mmf_cnf* c) { delete c; }

int mmf_cnf_variables(const mmf_cnf* c) { return c ? c->formula.n : 0; }

int mmf_cnf_clauses(const mmf_cnf* c) { return c ? static_cast<int>(c->formula.clauses.size()) : 0; }

mmf_status mmf_reduce_3sat(const mmf_cnf* c, const char* gain, mmf_instance** out) {
  MMF_REQUIRE(c);
  MMF_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const auto g = gain ? mmfair::parse_clause_gain(gain) : mmfair::ClauseGain::sqrt3;
    auto* h = new mmf_instance{mmfair::build_3sat_instance(c->formula, g), {}};
    for (const auto& l : h->inst.labels) h->names.push_back(l.name());
    *out = h;
  });
}

void mmf_instance_free(mmf_instance* i) { delete i; }

int mmf_instance_users(const mmf_instance* i) {
  return i ? i->inst.network.topology.num_users() : 0;
}

const char* mmf_instance_label(const mmf_instance* i, int user) {
  if (!i || user < 0 || user >= static_cast<int>(i->names.size())) return nullptr;
  return i->names[user].c_str();
}

mmf_status mmf_instance_write_json(const mmf_instance* i, const char* path) {
  MMF_REQUIRE(i);
  MMF_REQUIRE(path);
  return guarded([&] {
    std::ofstream f(path, std::ios::binary);
    if (!f) mmfair::fail(mmfair::ErrorCode::io, std::string("cannot write ") + path);
    mmfair::write_network_json(f, i->inst.network, &i->inst.labels);
  });
}

mmf_status mmf_instance_evaluate(const mmf_instance* i, const unsigned char* x, size_t n,
                                 double* min_rate) {
  MMF_REQUIRE(i);
  MMF_REQUIRE(min_rate);
  if (n > 0) MMF_REQUIRE(x);
  return guarded([&] {
    std::vector<bool> a(x, x + n);
    *min_rate = mmfair::evaluate_assignment(i->inst, a);
  });
}

mmf_status mmf_instance_check(const mmf_instance* i, int threads, mmf_sat_result* out,
                              unsigned char* assignment, size_t n) {
  MMF_REQUIRE(i);
  MMF_REQUIRE(out);
  return guarded([&] {
    const auto r = mmfair::brute_force_sat_check(i->inst, threads);
    *out = {r.best_min_rate, r.satisfiable ? 1 : 0, r.evaluated};
    if (assignment)
      for (std::size_t k = 0; k < n && k < r.best_assignment.size(); ++k)
        assignment[k] = r.best_assignment[k] ? 1 : 0;
  });
}

}  // extern "C"
