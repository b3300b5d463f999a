/* C interface to the mmfair library. All objects are opaque handles owned by
 * the caller and released with the matching _free function. Every call
 * returns an mmf_status; on failure mmf_last_error() describes the problem
 * for the calling thread. */
#ifndef MMFAIR_MMFAIR_H
#define MMFAIR_MMFAIR_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MMF_API __declspec(dllexport)
#else
#define MMF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmf_status {
  MMF_OK = 0,
  MMF_ERR_SHAPE = 1,
  MMF_ERR_DOMAIN = 2,
  MMF_ERR_CONDITIONING = 3,
  MMF_ERR_SOLVER = 4,
  MMF_ERR_FEASIBILITY = 5,
  MMF_ERR_CONFIG = 6,
  MMF_ERR_INPUT = 7,
  MMF_ERR_BUDGET = 8,
  MMF_ERR_IO = 9,
  MMF_ERR_NULL = 10,
  MMF_ERR_RANGE = 11,
  MMF_ERR_INTERNAL = 12
} mmf_status;

MMF_API const char* mmf_version(void);
MMF_API const char* mmf_status_string(mmf_status status);
/* Message of the last failed call on this thread, "" if none. */
MMF_API const char* mmf_last_error(void);

/* ---- scenario configuration and experiments ---------------------------- */

typedef struct mmf_config mmf_config;
typedef struct mmf_result mmf_result;

MMF_API mmf_status mmf_config_load(const char* path, mmf_config** out);
MMF_API mmf_status mmf_config_parse(const char* toml_text, mmf_config** out);
MMF_API void mmf_config_free(mmf_config* config);

MMF_API mmf_status mmf_config_set_seed(mmf_config* config, uint64_t seed);
MMF_API mmf_status mmf_config_set_trials(mmf_config* config, int trials);
MMF_API mmf_status mmf_config_set_snr(mmf_config* config, const double* snr_db, size_t count);
/* Comma-separated list, e.g. "maxmin,wmmse,mmse". */
MMF_API mmf_status mmf_config_set_algorithms(mmf_config* config, const char* list);
MMF_API mmf_status mmf_config_set_output(mmf_config* config, const char* prefix);
MMF_API mmf_status mmf_config_set_tol(mmf_config* config, double tol);
MMF_API mmf_status mmf_config_set_max_iters(mmf_config* config, int max_iters);
/* "cdf", "snr", "dynamic" or "kkt". */
MMF_API mmf_status mmf_config_set_kind(mmf_config* config, const char* kind);
MMF_API const char* mmf_config_output(const mmf_config* config);
MMF_API const char* mmf_config_kind(const mmf_config* config);

/* Runs the configured experiment kind. */
MMF_API mmf_status mmf_run(const mmf_config* config, mmf_result** out);
/* Max-min runs plus KKT certification regardless of the configured kind. */
MMF_API mmf_status mmf_run_kkt(const mmf_config* config, mmf_result** out);
MMF_API void mmf_result_free(mmf_result* result);

/* Writes <output>_*.csv and <output>.json. */
MMF_API mmf_status mmf_result_write(const mmf_config* config, mmf_result* result);
MMF_API size_t mmf_result_file_count(const mmf_result* result);
MMF_API const char* mmf_result_file(const mmf_result* result, size_t index);

typedef struct mmf_summary_row {
  const char* algorithm; /* valid while the result lives */
  double snr_db;
  int trials;
  double mean_min_rate;
  double mean_sum_rate;
  double p5_user_rate;
  double mean_iterations;
  int converged;
} mmf_summary_row;

MMF_API size_t mmf_result_summary_count(const mmf_result* result);
MMF_API mmf_status mmf_result_summary(const mmf_result* result, size_t index, mmf_summary_row* row);
MMF_API mmf_status mmf_result_kkt_counts(const mmf_result* result, size_t* passed, size_t* total);

/* ---- hardness gadgets --------------------------------------------------- */

typedef struct mmf_lemma1 mmf_lemma1;

typedef struct mmf_lemma1_summary {
  double best;
  double coarse_best;
  double fine_best;
  double grid_resolution;
  double tol_grid;
  double interior_rate;
  long long evaluations;
  long long near_max_points;
  int maximizers;       /* clusters */
  int matched_targets;  /* distinct targets among Q_a..Q_d that were hit */
  int unmatched;        /* clusters away from every target */
  int circle_family;
  int inconclusive;
  int pass;
} mmf_lemma1_summary;

/* coarse_points <= 0 and threads <= 0 select the defaults. */
MMF_API mmf_status mmf_lemma1_run(int coarse_points, int threads, mmf_lemma1** out);
MMF_API void mmf_lemma1_free(mmf_lemma1* report);
MMF_API mmf_status mmf_lemma1_get_summary(const mmf_lemma1* report, mmf_lemma1_summary* out);
/* Row-major 2x2 covariance; matched is 0..3 for Q_a..Q_d or -1. */
MMF_API mmf_status mmf_lemma1_maximizer(const mmf_lemma1* report, int index, double re[4],
                                        double im[4], int* matched);

typedef struct mmf_lemma2 mmf_lemma2;

MMF_API mmf_status mmf_lemma2_run(mmf_lemma2** out);
MMF_API void mmf_lemma2_free(mmf_lemma2* report);
MMF_API int mmf_lemma2_count(const mmf_lemma2* report);
MMF_API int mmf_lemma2_pass(const mmf_lemma2* report);
/* rates must hold 5 values. */
MMF_API mmf_status mmf_lemma2_check(const mmf_lemma2* report, int index, const char** label,
                                    double* min_rate, double* rates, int* expect_optimal,
                                    int* pass);

MMF_API double mmf_f_value(double theta, double alpha, double beta, double x);
/* Writes up to capacity maximizers as (theta, alpha, beta, x) quadruples. */
MMF_API mmf_status mmf_f_grid(int points, double* best, double* maximizers, size_t capacity,
                              size_t* count);

/* ---- 3-SAT reduction ---------------------------------------------------- */

typedef struct mmf_cnf mmf_cnf;
typedef struct mmf_instance mmf_instance;

MMF_API mmf_status mmf_cnf_read(const char* path, mmf_cnf** out);
MMF_API mmf_status mmf_cnf_parse(const char* dimacs_text, mmf_cnf** out);
MMF_API void mmf_cnf_free(mmf_cnf* cnf);
MMF_API int mmf_cnf_variables(const mmf_cnf* cnf);
MMF_API int mmf_cnf_clauses(const mmf_cnf* cnf);

/* gain: "sqrt3" or "one". */
MMF_API mmf_status mmf_reduce_3sat(const mmf_cnf* cnf, const char* gain, mmf_instance** out);
MMF_API void mmf_instance_free(mmf_instance* instance);
MMF_API int mmf_instance_users(const mmf_instance* instance);
MMF_API const char* mmf_instance_label(const mmf_instance* instance, int user);
MMF_API mmf_status mmf_instance_write_json(const mmf_instance* instance, const char* path);
/* x holds one 0/1 byte per variable. */
MMF_API mmf_status mmf_instance_evaluate(const mmf_instance* instance, const unsigned char* x,
                                         size_t n, double* min_rate);

typedef struct mmf_sat_result {
  double best_min_rate;
  int satisfiable;
  uint64_t evaluated;
} mmf_sat_result;

/* assignment (optional) receives the best assignment, one byte per variable. */
MMF_API mmf_status mmf_instance_check(const mmf_instance* instance, int threads,
                                      mmf_sat_result* out, unsigned char* assignment, size_t n);

#ifdef __cplusplus
}
#endif

#endif /* MMFAIR_MMFAIR_H */
