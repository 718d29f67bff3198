/* npmix — nonparametric mixture estimation via the penalized dual method.
 *
 * C interface to the shared library: opaque handles, integer error codes,
 * thread-local error messages. Every function that can fail returns one of
 * the NPMIX_* codes below; on failure npmix_last_error() describes the
 * problem. Handles are released with the matching *_free function.
 */
#ifndef NPMIX_H
#define NPMIX_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define NPMIX_OK 0
#define NPMIX_ERR_INVALID 1        /* bad argument or malformed input */
#define NPMIX_ERR_IO 2             /* file not readable/writable */
#define NPMIX_ERR_NUMERIC 3        /* numerical failure */
#define NPMIX_ERR_NOT_CONVERGED 4  /* result available but not converged */

#define NPMIX_FAMILY_NORMAL 0
#define NPMIX_FAMILY_POISSON 1

typedef struct npmix_dataset npmix_dataset;
typedef struct npmix_support npmix_support;
typedef struct npmix_fit npmix_fit;

const char* npmix_version(void);

/* Message for the most recent failure on this thread. */
const char* npmix_last_error(void);

/* ---- datasets ------------------------------------------------------- */

/* Load a CSV (one observation per row) and deduplicate rows equal within
 * dedup_tol (max-norm; 0 = exact equality). */
int npmix_dataset_from_csv(const char* path, int has_header, double dedup_tol,
                           npmix_dataset** out);

/* n x p row-major buffer. */
int npmix_dataset_from_rows(const double* rows, long n, long p, double dedup_tol,
                            npmix_dataset** out);

/* Equal-weight normal-mixture draw: supports are all p-fold combinations of
 * coords, observations are support + N(0, I). Deterministic per seed. */
int npmix_dataset_synthetic(long n, long p, const double* coords, long ncoords,
                            uint64_t seed, npmix_dataset** out);

long npmix_dataset_n(const npmix_dataset* ds); /* raw sample size */
long npmix_dataset_d(const npmix_dataset* ds); /* distinct observations */
long npmix_dataset_p(const npmix_dataset* ds);
double npmix_dataset_count(const npmix_dataset* ds, long i);
int npmix_dataset_distinct_row(const npmix_dataset* ds, long i, double* buf, long buflen);
void npmix_dataset_free(npmix_dataset* ds);

/* ---- support sets ---------------------------------------------------- */

int npmix_support_from_data(const npmix_dataset* ds, npmix_support** out);
int npmix_support_grid_1d(double lo, double hi, double step, npmix_support** out);
int npmix_support_from_rows(const double* rows, long m, long p, npmix_support** out);
long npmix_support_m(const npmix_support* s);
long npmix_support_p(const npmix_support* s);
int npmix_support_row(const npmix_support* s, long j, double* buf, long buflen);
void npmix_support_free(npmix_support* s);

/* ---- solver options --------------------------------------------------- */

typedef struct npmix_options {
  double joint_tol;        /* |dK| ending the joint phase (1e-6) */
  double psi_tol;          /* gradient certificate stop (0.005) */
  double step_shrink;      /* line-search halving factor (0.5) */
  double prune_threshold;  /* inactive-constraint cutoff on p^gamma (1e-12) */
  double ridge_floor;      /* first Hessian ridge (1e-10) */
  double gamma_cap;        /* joint-phase handoff bound on gamma (500) */
  double active_threshold; /* weight above this counts toward m_hat (1e-6) */
  long max_iter_joint;
  long max_iter_fixed;
  long max_iter_em;
  double em_tol;           /* D-EM/C-EM tolerance; meaning set per call */
} npmix_options;

void npmix_options_init(npmix_options* opt);

/* ---- fitting ----------------------------------------------------------- */

/* Penalized dual solve on a fixed support set. For the normal family, sigma
 * is a p*p row-major covariance scaled by delta (NULL = sample covariance of
 * the dataset). prune != 0 runs the inactive-constraint variant. Returns
 * NPMIX_OK or NPMIX_ERR_NOT_CONVERGED; *out is set in both cases. */
int npmix_fit_pd(const npmix_dataset* ds, const npmix_support* sup, int family,
                 double delta, const double* sigma, const npmix_options* opt, int prune,
                 npmix_fit** out);

/* Fixed-support EM baseline. stop_on_loglik_change = 0 stops on the gradient
 * certificate psi <= em_tol (psi_tol when em_tol <= 0), otherwise on
 * |delta loglik| <= em_tol. */
int npmix_fit_dem(const npmix_dataset* ds, const npmix_support* sup, int family,
                  double delta, const double* sigma, const npmix_options* opt,
                  int stop_on_loglik_change, npmix_fit** out);

/* Fixed-support penalized dual fit followed by continuous EM over weights,
 * locations and the common covariance, seeded with the active supports.
 * step1/step2 may each be NULL if not wanted. */
int npmix_fit_two_stage(const npmix_dataset* ds, const npmix_support* sup, int family,
                        double delta, const double* sigma, const npmix_options* opt,
                        npmix_fit** step1, npmix_fit** step2);

/* ---- fit accessors ------------------------------------------------------ */

double npmix_fit_loglik(const npmix_fit* f);
double npmix_fit_psi(const npmix_fit* f);          /* NaN for continuous fits */
double npmix_fit_gamma(const npmix_fit* f);        /* NaN for EM fits */
long npmix_fit_iterations(const npmix_fit* f);
int npmix_fit_converged(const npmix_fit* f);
long npmix_fit_num_components(const npmix_fit* f); /* length of the weight vector */
int npmix_fit_weights(const npmix_fit* f, double* buf, long buflen);
long npmix_fit_num_active(const npmix_fit* f, double threshold);
int npmix_fit_component(const npmix_fit* f, long j, double* theta_buf, long buflen,
                        double* weight);
long npmix_fit_trace_len(const npmix_fit* f);
/* Any output pointer may be NULL. k and gamma are NaN for EM traces. */
int npmix_fit_trace_row(const npmix_fit* f, long row, double* iteration, double* k,
                        double* gamma, double* loglik, double* psi);
void npmix_fit_free(npmix_fit* f);

/* ---- whole pipelines ----------------------------------------------------- */

/* Execute a full run described by a JSON config (same schema the CLI uses);
 * writes report.json/trace.csv/tree.csv/cdf.csv under the configured output
 * directory and returns the report as a JSON string (free it with
 * npmix_string_free). Returns NPMIX_OK, NPMIX_ERR_NOT_CONVERGED, or an error
 * code for invalid configs. */
int npmix_run_json(const char* config_json, char** report_json_out);
void npmix_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* NPMIX_H */
