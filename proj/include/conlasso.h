/* C interface to the constrained sparse regression toolkit: opaque
 * handles, integer status codes, thread-local error messages. All array
 * arguments are caller-owned; matrices are dense row-major doubles.
 * Strings returned as char* must be released with conlasso_string_free.
 */
#ifndef CONLASSO_H
#define CONLASSO_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int64_t conlasso_index;

typedef enum conlasso_status {
  CONLASSO_OK = 0,
  CONLASSO_ERR_INVALID_ARG = 1,
  CONLASSO_ERR_DIMENSION = 2,
  CONLASSO_ERR_NON_FINITE = 3,
  CONLASSO_ERR_BAD_LABELS = 4,
  CONLASSO_ERR_BAD_WEIGHTS = 5,
  CONLASSO_ERR_INCOMPATIBLE_METHOD = 6,
  CONLASSO_ERR_MAX_ITER = 7,
  CONLASSO_ERR_DEGENERATE_PATH = 8,
  CONLASSO_ERR_FOLD_TOO_SMALL = 9,
  CONLASSO_ERR_SUBSAMPLE_TOO_SMALL = 10,
  CONLASSO_ERR_IO = 11,
  CONLASSO_ERR_INTERNAL = 12
} conlasso_status;

typedef struct conlasso_problem conlasso_problem;
typedef struct conlasso_result conlasso_result;

const char* conlasso_version(void);
const char* conlasso_status_name(int status);
/* message of the most recent failure on this thread; empty if none */
const char* conlasso_last_error(void);

/* ---- problem construction ---- */

conlasso_problem* conlasso_problem_create(conlasso_index n, conlasso_index d,
                                          const double* X_rowmajor, const double* y);
conlasso_problem* conlasso_problem_from_csv(const char* x_csv, const char* y_csv,
                                            const char* c_csv_or_null);
conlasso_problem* conlasso_problem_from_dataset(
    const char* features_csv, const char* response_column, const char* const* compositional,
    conlasso_index n_compositional, int all_compositional, double pseudocount, int closure,
    int log_transform, int zero_sum_row, const char* constraints_csv_or_null);
conlasso_problem* conlasso_problem_from_synthetic(conlasso_index n, conlasso_index d,
                                                  conlasso_index d_nonzero, conlasso_index k,
                                                  double sigma, int zerosum, uint64_t seed);
void conlasso_problem_free(conlasso_problem* p);

int conlasso_problem_set_constraints(conlasso_problem* p, conlasso_index k,
                                     const double* C_rowmajor);
int conlasso_problem_set_weights(conlasso_problem* p, const double* w);
/* kind: "R1" "R2" "R3" "R4" "C1" "C2"; pass rho <= 0 / rho_class >= 1 to
 * keep the defaults (1.345 and -1.0) */
int conlasso_problem_set_formulation(conlasso_problem* p, const char* kind, double rho,
                                     double rho_class);
/* method: "auto" "path-alg" "dr" "p-pds" "pf-pds"; max_iter/tol/ratio <= 0
 * keep defaults */
int conlasso_problem_set_solver(conlasso_problem* p, const char* method, int64_t max_iter,
                                double tol, double lam_min_ratio);
int conlasso_problem_set_threads(conlasso_problem* p, int threads);
int conlasso_problem_validate(const conlasso_problem* p);

conlasso_index conlasso_problem_n(const conlasso_problem* p);
conlasso_index conlasso_problem_d(const conlasso_problem* p);
conlasso_index conlasso_problem_k(const conlasso_problem* p);
int conlasso_lambda_max(const conlasso_problem* p, double* out);

/* ---- computation modes ----
 * Each call produces a result handle (also on CONLASSO_ERR_MAX_ITER, with
 * converged=false recorded in the summary). */

int conlasso_solve_fixed(conlasso_problem* p, double lam, int rescaled, int theory,
                         uint64_t seed, conlasso_result** out);
int conlasso_solve_path(conlasso_problem* p, double lam_min_ratio, conlasso_index num_grid,
                        uint64_t seed, conlasso_result** out);
/* rule: "min" or "1se" */
int conlasso_run_cv(conlasso_problem* p, conlasso_index folds, conlasso_index grid_size,
                    const char* rule, double lam_min_ratio, uint64_t seed,
                    conlasso_result** out);
/* mode: "fixed-lam" "first-q" "max-coef" */
int conlasso_run_stabsel(conlasso_problem* p, const char* mode, conlasso_index q,
                         conlasso_index B, double fraction, double threshold, double lam,
                         int rescaled, double lam_min_ratio, uint64_t seed,
                         conlasso_result** out);

/* ---- result access ---- */

/* 0 fixed, 1 path, 2 cv, 3 stabsel */
int conlasso_result_kind(const conlasso_result* r);
conlasso_index conlasso_result_dim(const conlasso_result* r);
int conlasso_result_beta(const conlasso_result* r, double* buf, conlasso_index len);
conlasso_index conlasso_result_path_points(const conlasso_result* r);
int conlasso_result_path_lambdas(const conlasso_result* r, double* buf, conlasso_index len);
/* points x d, row-major */
int conlasso_result_path_betas(const conlasso_result* r, double* buf, conlasso_index len);
int conlasso_result_frequencies(const conlasso_result* r, double* buf, conlasso_index len);
int conlasso_result_selected(const conlasso_result* r, conlasso_index* buf, conlasso_index len,
                             conlasso_index* count);
char* conlasso_result_summary_json(const conlasso_result* r);
int conlasso_result_save(const conlasso_result* r, const char* out_dir);
void conlasso_result_free(conlasso_result* r);
void conlasso_string_free(char* s);

/* ---- batch file utilities ---- */

int conlasso_synth_write(conlasso_index n, conlasso_index d, conlasso_index d_nonzero,
                         conlasso_index k, double sigma, int zerosum, uint64_t seed,
                         const char* out_dir);
/* kind: "coefficients" "path" "stabsel-profile" "cv-curve" */
int conlasso_plotdata(const char* result_dir, const char* kind, const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* CONLASSO_H */
