// mmfair command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmfair/mmfair.h"

namespace {

int exit_code(mmf_status s) {
  switch (s) {
    case MMF_OK: return 0;
    case MMF_ERR_CONFIG:
    case MMF_ERR_INPUT:
    case MMF_ERR_IO:
    case MMF_ERR_NULL:
      return 1;
    default:
      return 2;
  }
}

int report(mmf_status s) {
  if (s != MMF_OK) std::fprintf(stderr, "error (%s): %s\n", mmf_status_string(s), mmf_last_error());
  return exit_code(s);
}

struct Overrides {
  std::vector<double> snr;
  std::string algos;
  std::string out;
  long long seed = -1;
  int trials = -1;
  int max_iters = -1;
  double tol = -1.0;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "RNG seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--trials", o.trials, "number of Monte Carlo trials");
  cmd->add_option("--snr", o.snr, "SNR list in dB (comma separated)")->delimiter(',');
  cmd->add_option("--algos", o.algos, "algorithms, e.g. maxmin,wmmse,mmse");
  cmd->add_option("--out", o.out, "output prefix");
  cmd->add_option("--tol", o.tol, "relative stopping tolerance");
  cmd->add_option("--max-iters", o.max_iters, "iteration cap");
}

mmf_status apply(mmf_config* c, const Overrides& o) {
  mmf_status s = MMF_OK;
  if (s == MMF_OK && o.seed >= 0) s = mmf_config_set_seed(c, static_cast<uint64_t>(o.seed));
  if (s == MMF_OK && o.trials != -1) s = mmf_config_set_trials(c, o.trials);
  if (s == MMF_OK && !o.snr.empty()) s = mmf_config_set_snr(c, o.snr.data(), o.snr.size());
  if (s == MMF_OK && !o.algos.empty()) s = mmf_config_set_algorithms(c, o.algos.c_str());
  if (s == MMF_OK && !o.out.empty()) s = mmf_config_set_output(c, o.out.c_str());
  if (s == MMF_OK && o.tol != -1.0) s = mmf_config_set_tol(c, o.tol);
  if (s == MMF_OK && o.max_iters != -1) s = mmf_config_set_max_iters(c, o.max_iters);
  return s;
}

int cmd_run(const std::string& path, const Overrides& o, bool kkt) {
  mmf_config* cfg = nullptr;
  mmf_status s = mmf_config_load(path.c_str(), &cfg);
  if (s == MMF_OK) s = apply(cfg, o);
  mmf_result* res = nullptr;
  if (s == MMF_OK) s = kkt ? mmf_run_kkt(cfg, &res) : mmf_run(cfg, &res);
  if (s == MMF_OK) s = mmf_result_write(cfg, res);
  if (s == MMF_OK) {
    std::printf("experiment: %s\n", kkt ? "kkt" : mmf_config_kind(cfg));
    const size_t rows = mmf_result_summary_count(res);
    if (rows > 0) std::printf("%-8s %8s %14s %14s %14s\n", "algo", "snr_db", "mean_min_rate",
                              "mean_sum_rate", "p5_user_rate");
    for (size_t i = 0; i < rows; ++i) {
      mmf_summary_row r;
      mmf_result_summary(res, i, &r);
      std::printf("%-8s %8.2f %14.6f %14.6f %14.6f\n", r.algorithm, r.snr_db, r.mean_min_rate,
                  r.mean_sum_rate, r.p5_user_rate);
    }
    if (kkt) {
      size_t passed = 0, total = 0;
      mmf_result_kkt_counts(res, &passed, &total);
      std::printf("kkt: %zu / %zu PASS\n", passed, total);
    }
    for (size_t i = 0; i < mmf_result_file_count(res); ++i)
      std::printf("wrote %s\n", mmf_result_file(res, i));
  }
  mmf_result_free(res);
  mmf_config_free(cfg);
  return report(s);
}

void print_matrix(const double re[4], const double im[4]) {
  std::printf("[[%+.4f%+.4fj, %+.4f%+.4fj], [%+.4f%+.4fj, %+.4f%+.4fj]]", re[0], im[0], re[1],
              im[1], re[2], im[2], re[3], im[3]);
}

int cmd_lemma1(int coarse, int threads) {
  mmf_lemma1* rep = nullptr;
  mmf_status s = mmf_lemma1_run(coarse, threads, &rep);
  if (s != MMF_OK) return report(s);
  mmf_lemma1_summary sum;
  mmf_lemma1_get_summary(rep, &sum);
  std::printf("best min-rate: %.12f (coarse %.12f, symmetric %.12f)\n", sum.best,
              sum.coarse_best, sum.fine_best);
  std::printf("grid resolution: %g, match radius: %g, evaluations: %lld\n", sum.grid_resolution,
              sum.tol_grid, sum.evaluations);
  std::printf("symmetric maximizers: %d clusters from %lld near-max points\n", sum.maximizers,
              sum.near_max_points);
  static const char* names[4] = {"Q_a", "Q_b", "Q_c", "Q_d"};
  for (int i = 0; i < sum.maximizers; ++i) {
    double re[4], im[4];
    int matched = -1;
    mmf_lemma1_maximizer(rep, i, re, im, &matched);
    std::printf("  ");
    print_matrix(re, im);
    std::printf("  %s\n", matched >= 0 ? names[matched] : "unmatched");
  }
  std::printf("targets hit: %d / 4, unmatched clusters: %d\n", sum.matched_targets, sum.unmatched);
  if (sum.circle_family)
    std::printf("all near-max points are rank one with Re Q12 = 0 (a = [cos t, +-j sin t])\n");
  std::printf("interior point Q = I/2: min-rate %.6f\n", sum.interior_rate);
  std::printf("%s\n", sum.inconclusive ? "INCONCLUSIVE" : sum.pass ? "PASS" : "FAIL");
  mmf_lemma1_free(rep);
  return 0;
}

int cmd_lemma2() {
  mmf_lemma2* rep = nullptr;
  mmf_status s = mmf_lemma2_run(&rep);
  if (s != MMF_OK) return report(s);
  for (int i = 0; i < mmf_lemma2_count(rep); ++i) {
    const char* label = nullptr;
    double min_rate = 0.0, rates[5];
    int optimal = 0, pass = 0;
    mmf_lemma2_check(rep, i, &label, &min_rate, rates, &optimal, &pass);
    std::printf("%-36s min %.9f  [%.4f %.4f %.4f %.4f %.4f]  expect %s  %s\n", label, min_rate,
                rates[0], rates[1], rates[2], rates[3], rates[4], optimal ? "=1" : "<1",
                pass ? "ok" : "MISMATCH");
  }
  std::printf("%s\n", mmf_lemma2_pass(rep) ? "PASS" : "FAIL");
  mmf_lemma2_free(rep);
  return 0;
}

int cmd_reduce(const std::string& path, bool check, const std::string& gain,
               const std::string& out, int threads) {
  mmf_cnf* cnf = nullptr;
  mmf_instance* inst = nullptr;
  mmf_status s = mmf_cnf_read(path.c_str(), &cnf);
  if (s == MMF_OK) s = mmf_reduce_3sat(cnf, gain.c_str(), &inst);
  if (s == MMF_OK) {
    std::printf("variables: %d, clauses: %d, users: %d, clause gain: %s\n", mmf_cnf_variables(cnf),
                mmf_cnf_clauses(cnf), mmf_instance_users(inst), gain.c_str());
    if (!out.empty()) {
      s = mmf_instance_write_json(inst, out.c_str());
      if (s == MMF_OK) std::printf("wrote %s\n", out.c_str());
    }
  }
  if (s == MMF_OK && check) {
    const int n = mmf_cnf_variables(cnf);
    std::vector<unsigned char> x(static_cast<size_t>(n));
    mmf_sat_result r;
    s = mmf_instance_check(inst, threads, &r, x.data(), x.size());
    if (s == MMF_OK) {
      std::printf("best min-rate: %.12f over %llu assignments\n", r.best_min_rate,
                  static_cast<unsigned long long>(r.evaluated));
      std::printf("best assignment:");
      for (int i = 0; i < n; ++i) std::printf(" x%d=%d", i + 1, x[i]);
      std::printf("\n%s\n", r.satisfiable ? "SAT" : "UNSAT");
    }
  }
  mmf_instance_free(inst);
  mmf_cnf_free(cnf);
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"max-min fair transceiver design and hardness gadgets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("mmfair ") + mmf_version());

  Overrides run_o, kkt_o;
  std::string run_cfg, kkt_cfg, cnf, gain = "sqrt3", net_out;
  bool check = false;
  int coarse = 5, threads = 0;

  auto* run = app.add_subcommand("run", "run the experiment described by a TOML config");
  run->add_option("config", run_cfg, "config file")->required();
  add_overrides(run, run_o);

  auto* kkt = app.add_subcommand("kkt", "max-min runs followed by KKT certification");
  kkt->add_option("config", kkt_cfg, "config file")->required();
  add_overrides(kkt, kkt_o);

  auto* l1 = app.add_subcommand("verify-lemma1", "brute-force the three-user gadget");
  l1->add_option("--coarse", coarse, "points per parameter on the full grid");
  l1->add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* l2 = app.add_subcommand("verify-lemma2", "check the five-user gadget");

  auto* red = app.add_subcommand("reduce-3sat", "build the interference channel for a 3-CNF");
  red->add_option("cnf", cnf, "DIMACS CNF file")->required();
  red->add_flag("--check", check, "enumerate all assignments");
  red->add_option("--clause-gain", gain, "clause-user direct gain")
      ->check(CLI::IsMember({"sqrt3", "one"}));
  red->add_option("--out", net_out, "write the instance as JSON");
  red->add_option("--threads", threads, "worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n\n%s", e.what(), app.help().c_str());
    return 1;
  }

  if (run->parsed()) return cmd_run(run_cfg, run_o, false);
  if (kkt->parsed()) return cmd_run(kkt_cfg, kkt_o, true);
  if (l1->parsed()) return cmd_lemma1(coarse, threads);
  if (l2->parsed()) return cmd_lemma2();
  if (red->parsed()) return cmd_reduce(cnf, check, gain, net_out, threads);
  std::fprintf(stderr, "%s", app.help().c_str());
  return 1;
}
