// Exercises the shared library through its C header only.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include "mmfair/mmfair.h"

namespace {

const char* kSmall = R"(
[topology]
cells = 2
users_per_cell = 1
tx_antennas = 2
rx_antennas = 2
[experiment]
kind = "cdf"
snr_db = [10.0]
trials = 3
seed = 5
threads = 1
algorithms = ["maxmin", "wmmse"]
)";

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() / "mmfair_capi_test";
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("version and status strings") {
  CHECK(std::strlen(mmf_version()) > 0);
  CHECK(std::string(mmf_status_string(MMF_OK)) == "ok");
  for (int s = MMF_OK; s <= MMF_ERR_INTERNAL; ++s)
    CHECK(std::strlen(mmf_status_string(static_cast<mmf_status>(s))) > 0);
}

TEST_CASE("null handles are rejected with a message") {
  CHECK(mmf_config_parse(nullptr, nullptr) == MMF_ERR_NULL);
  CHECK(std::strlen(mmf_last_error()) > 0);
  CHECK(mmf_config_set_seed(nullptr, 1) == MMF_ERR_NULL);
  CHECK(mmf_run(nullptr, nullptr) == MMF_ERR_NULL);
  mmf_config_free(nullptr);
  mmf_result_free(nullptr);
  mmf_cnf_free(nullptr);
  mmf_instance_free(nullptr);
  mmf_lemma1_free(nullptr);
  mmf_lemma2_free(nullptr);
}

TEST_CASE("config errors map to status codes") {
  mmf_config* cfg = nullptr;
  CHECK(mmf_config_load("/nonexistent/x.toml", &cfg) == MMF_ERR_IO);
  CHECK(cfg == nullptr);
  CHECK(mmf_config_parse("[experiment]\ntrials = 0\n", &cfg) == MMF_ERR_CONFIG);
  CHECK(std::string(mmf_last_error()).find("trial") != std::string::npos);
  REQUIRE(mmf_config_parse(kSmall, &cfg) == MMF_OK);
  CHECK(mmf_config_set_trials(cfg, 0) == MMF_ERR_CONFIG);
  CHECK(mmf_config_set_algorithms(cfg, "maxmin,nope") == MMF_ERR_CONFIG);
  CHECK(mmf_config_set_kind(cfg, "weird") == MMF_ERR_CONFIG);
  CHECK(mmf_config_set_snr(cfg, nullptr, 0) != MMF_OK);
  CHECK(std::string(mmf_config_kind(cfg)) == "cdf");
  mmf_config_free(cfg);
}

TEST_CASE("run an experiment and write its outputs") {
  mmf_config* cfg = nullptr;
  REQUIRE(mmf_config_parse(kSmall, &cfg) == MMF_OK);
  const double snr[2] = {0.0, 10.0};
  REQUIRE(mmf_config_set_snr(cfg, snr, 2) == MMF_OK);
  REQUIRE(mmf_config_set_kind(cfg, "snr") == MMF_OK);
  const std::string prefix = (temp_dir() / "run").string();
  REQUIRE(mmf_config_set_output(cfg, prefix.c_str()) == MMF_OK);
  CHECK(std::string(mmf_config_output(cfg)) == prefix);

  mmf_result* res = nullptr;
  REQUIRE(mmf_run(cfg, &res) == MMF_OK);
  REQUIRE(mmf_result_summary_count(res) == 4);
  mmf_summary_row row;
  REQUIRE(mmf_result_summary(res, 0, &row) == MMF_OK);
  CHECK(row.trials == 3);
  CHECK(row.mean_min_rate >= 0.0);
  CHECK(mmf_result_summary(res, 4, &row) == MMF_ERR_RANGE);

  REQUIRE(mmf_result_write(cfg, res) == MMF_OK);
  CHECK(mmf_result_file_count(res) >= 3);
  for (size_t i = 0; i < mmf_result_file_count(res); ++i)
    CHECK(std::filesystem::exists(mmf_result_file(res, i)));
  mmf_result_free(res);

  REQUIRE(mmf_config_set_tol(cfg, 1e-12) == MMF_OK);
  REQUIRE(mmf_config_set_max_iters(cfg, 4000) == MMF_OK);
  REQUIRE(mmf_run_kkt(cfg, &res) == MMF_OK);
  size_t passed = 0, total = 0;
  REQUIRE(mmf_result_kkt_counts(res, &passed, &total) == MMF_OK);
  CHECK(total == 6);
  mmf_result_free(res);
  mmf_config_free(cfg);
  std::filesystem::remove_all(temp_dir());
}

TEST_CASE("gadget checks") {
  mmf_lemma2* l2 = nullptr;
  REQUIRE(mmf_lemma2_run(&l2) == MMF_OK);
  CHECK(mmf_lemma2_pass(l2) == 1);
  REQUIRE(mmf_lemma2_count(l2) > 2);
  const char* label = nullptr;
  double min_rate = 0.0, rates[5];
  int optimal = 0, pass = 0;
  REQUIRE(mmf_lemma2_check(l2, 0, &label, &min_rate, rates, &optimal, &pass) == MMF_OK);
  CHECK(optimal == 1);
  CHECK(std::abs(min_rate - 1.0) < 1e-9);
  CHECK(mmf_lemma2_check(l2, 999, &label, &min_rate, rates, &optimal, &pass) == MMF_ERR_RANGE);
  mmf_lemma2_free(l2);

  CHECK(mmf_f_value(0.0, 1.0, 0.0, 1.0) == doctest::Approx(1.0));
  double best = 0.0, pts[4 * 8];
  size_t count = 0;
  REQUIRE(mmf_f_grid(21, &best, pts, 8, &count) == MMF_OK);
  CHECK(best == doctest::Approx(1.0));
  CHECK(count == 4);
}

TEST_CASE("3-SAT reduction through the C API") {
  mmf_cnf* cnf = nullptr;
  CHECK(mmf_cnf_parse("p cnf 2 1\n1 2 0\n", &cnf) == MMF_ERR_INPUT);
  REQUIRE(mmf_cnf_parse("p cnf 3 2\n1 -2 3 0\n-1 -1 -1 0\n", &cnf) == MMF_OK);
  CHECK(mmf_cnf_variables(cnf) == 3);
  CHECK(mmf_cnf_clauses(cnf) == 2);
  mmf_instance* inst = nullptr;
  CHECK(mmf_reduce_3sat(cnf, "three", &inst) == MMF_ERR_CONFIG);
  REQUIRE(mmf_reduce_3sat(cnf, "sqrt3", &inst) == MMF_OK);
  CHECK(mmf_instance_users(inst) == 17);
  CHECK(std::string(mmf_instance_label(inst, 15)) == "C1");
  CHECK(std::string(mmf_instance_label(inst, 0)) == "X1_1");

  const unsigned char good[3] = {0, 0, 1};
  const unsigned char bad[3] = {1, 1, 0};
  double rate = 0.0;
  REQUIRE(mmf_instance_evaluate(inst, good, 3, &rate) == MMF_OK);
  CHECK(rate >= 1.0 - 1e-9);
  REQUIRE(mmf_instance_evaluate(inst, bad, 3, &rate) == MMF_OK);
  CHECK(rate < 1.0);
  CHECK(mmf_instance_evaluate(inst, good, 2, &rate) != MMF_OK);

  mmf_sat_result sat;
  unsigned char x[3];
  REQUIRE(mmf_instance_check(inst, 1, &sat, x, 3) == MMF_OK);
  CHECK(sat.satisfiable == 1);
  CHECK(sat.evaluated == 8);
  CHECK(x[0] == 0);

  const std::string path = (temp_dir() / "inst.json").string();
  CHECK(mmf_instance_write_json(inst, path.c_str()) == MMF_OK);
  CHECK(std::filesystem::file_size(path) > 0);
  std::filesystem::remove_all(temp_dir());
  mmf_instance_free(inst);
  mmf_cnf_free(cnf);
}
