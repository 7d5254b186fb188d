/* matinfo — matrix information measures for representation learning.
 *
 * C API over the matinfo core: opaque handles, integer status codes, and
 * caller-owned strings. Every function returns MIT_OK on success; on failure
 * the thread-local message from mit_last_error() describes what went wrong.
 *
 * Status codes match the CLI exit-code contract:
 *   1 usage/config error, 2 data error, 3 numerical failure,
 *   4 verification failure.
 */
#ifndef MATINFO_H
#define MATINFO_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mit_status {
  MIT_OK = 0,
  MIT_ERR_USAGE = 1,
  MIT_ERR_DATA = 2,
  MIT_ERR_NUMERIC = 3,
  MIT_ERR_VERIFY = 4,
} mit_status;

typedef enum mit_kernel_kind {
  MIT_KERNEL_COVARIANCE = 0,
  MIT_KERNEL_GRAM = 1,
} mit_kernel_kind;

typedef struct mit_matrix mit_matrix;  /* dense feature/raw matrix */
typedef struct mit_kernel mit_kernel;  /* sanitized unit-diagonal PSD kernel */
typedef struct mit_config mit_config;  /* sandbox/training configuration */

const char* mit_version(void);

/* Thread-local message for the most recent failure in this thread. */
const char* mit_last_error(void);

/* Strings returned through char** out-parameters are heap copies. */
void mit_string_free(char* s);

/* ---- matrices ---------------------------------------------------------- */

/* Column-major data, rows = feature dimensions, cols = samples. */
mit_status mit_matrix_create(const double* data, int rows, int cols,
                             mit_matrix** out);

/* CSV: rows = feature dimensions, columns = samples, no header. */
mit_status mit_matrix_from_csv(const char* path, mit_matrix** out);

int mit_matrix_rows(const mit_matrix* m);
int mit_matrix_cols(const mit_matrix* m);
mit_status mit_matrix_get(const mit_matrix* m, int row, int col, double* out);
void mit_matrix_free(mit_matrix* m);

/* ---- kernels ----------------------------------------------------------- */

mit_status mit_kernel_covariance(const mit_matrix* z, mit_kernel** out);
mit_status mit_kernel_gram(const mit_matrix* z, mit_kernel** out);
/* Sanitizes an explicit symmetric unit-diagonal PSD matrix. */
mit_status mit_kernel_from_matrix(const mit_matrix* k, mit_kernel** out);
mit_status mit_kernel_hadamard(const mit_kernel* k1, const mit_kernel* k2,
                               mit_kernel** out);

int mit_kernel_size(const mit_kernel* k);
mit_status mit_kernel_get(const mit_kernel* k, int row, int col, double* out);
/* Descending sanitized eigenvalues; buffer must hold mit_kernel_size values. */
mit_status mit_kernel_eigenvalues(const mit_kernel* k, double* out);
void mit_kernel_free(mit_kernel* k);

/* ---- measures (all values in nats) ------------------------------------- */

mit_status mit_entropy(const mit_kernel* k, double alpha, double* out);
mit_status mit_mutual_information(const mit_kernel* k1, const mit_kernel* k2,
                                  double alpha, double* out);
mit_status mit_joint_entropy(const mit_kernel* k1, const mit_kernel* k2,
                             double alpha, double* out);
mit_status mit_matrix_kl(const mit_kernel* k1, const mit_matrix* k2,
                         double* out);
mit_status mit_matrix_js(const mit_kernel* k1, const mit_kernel* k2,
                         double* out);
mit_status mit_eigen_js(const mit_kernel* k1, const mit_kernel* k2,
                        double* out);
mit_status mit_tcr_kernel(const mit_kernel* k, double mu, double* out);
mit_status mit_tcr_features(const mit_matrix* z, double mu, double* out);
mit_status mit_effective_rank(const mit_matrix* a, double* out);

/* Full JSON measure report over one or two feature matrices (b may be NULL);
 * the same payload the CLI `measure` command prints. */
mit_status mit_measure_report(const mit_matrix* a, const char* a_name,
                              const mit_matrix* b, const char* b_name,
                              mit_kernel_kind kind, const double* alphas,
                              int n_alphas, const double* mus, int n_mus,
                              char** json_out);

/* ---- training sandbox --------------------------------------------------- */

mit_status mit_config_create(mit_config** out);
mit_status mit_config_load(const char* path, mit_config** out);
/* Keys as in the config file schema (see README). */
mit_status mit_config_set(mit_config* cfg, const char* key, const char* value);
mit_status mit_config_json(const mit_config* cfg, char** json_out);
void mit_config_free(mit_config* cfg);

/* Runs training per the config, writing trajectory.jsonl, summary.json,
 * manifest.json and optional feature checkpoints under run_dir. Returns the
 * summary JSON. A diverged run writes its partial trajectory and reports
 * MIT_ERR_NUMERIC. */
mit_status mit_train(const mit_config* cfg, const char* run_dir,
                     char** summary_json_out);

/* One masked run per mu (shared seed); returns the summary table as TSV. */
mit_status mit_mu_sweep(const mit_config* cfg, const double* mus, int n_mus,
                        const char* run_dir, char** table_tsv_out);

/* ---- verification ------------------------------------------------------- */

/* Runs every executable property; *all_pass_out is 1 when every property
 * held. report_out receives JSON when as_json is nonzero, a plain-text table
 * otherwise. Returns MIT_ERR_VERIFY on any violation, MIT_OK otherwise. */
mit_status mit_verify(const int* sizes, int n_sizes, int trials, uint64_t seed,
                      int as_json, char** report_out, int* all_pass_out);

/* ---- trajectory scanning ------------------------------------------------ */

/* Recomputes measures over step_<k>.csv checkpoints (branch1/branch2
 * subdirectories or flat single-branch dumps); returns TSV sorted by step. */
mit_status mit_trajectory_scan(const char* run_dir, mit_kernel_kind kind,
                               double alpha, double mu, char** tsv_out);

#ifdef __cplusplus
}
#endif

#endif /* MATINFO_H */
