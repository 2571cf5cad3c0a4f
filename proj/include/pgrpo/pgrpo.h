/*
 * C API of the pgrpo shared library.
 *
 * All functions return a pgrpo_status_t; PGRPO_OK means success. On failure
 * pgrpo_last_error() holds a thread-local description. Objects are opaque
 * handles released with their matching _free function. Strings produced by
 * the library are heap-allocated and released with pgrpo_string_free.
 */
#ifndef PGRPO_PGRPO_H_
#define PGRPO_PGRPO_H_

#include <stdint.h>

#if defined(_WIN32)
#define PGRPO_API __declspec(dllexport)
#else
#define PGRPO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pgrpo_status_t {
  PGRPO_OK = 0,
  PGRPO_ERR_INVALID_ARG = 1, /* violated precondition or bad argument */
  PGRPO_ERR_IO = 2,          /* file system failure */
  PGRPO_ERR_FORMAT = 3,      /* malformed dataset, checkpoint, or config */
  PGRPO_ERR_NUMERIC = 4,     /* non-finite objective or gradient */
  PGRPO_ERR_REMOTE = 5,      /* judge transport or protocol failure */
  PGRPO_ERR_INTERNAL = 6
} pgrpo_status_t;

typedef struct pgrpo_dataset_s pgrpo_dataset_t;
typedef struct pgrpo_policy_s pgrpo_policy_t;

PGRPO_API const char* pgrpo_version(void);
PGRPO_API const char* pgrpo_status_name(pgrpo_status_t status);
/* Thread-local message describing the most recent failure. */
PGRPO_API const char* pgrpo_last_error(void);
PGRPO_API void pgrpo_string_free(char* s);

/* Token vocabulary manifest: one "name<TAB>id" line per token. */
PGRPO_API pgrpo_status_t pgrpo_vocab_manifest(char** manifest_out);

/* ---- dataset ---- */
PGRPO_API pgrpo_status_t pgrpo_dataset_generate(const char* gen_config_json,
                                                pgrpo_dataset_t** out);
PGRPO_API pgrpo_status_t pgrpo_dataset_read(const char* path,
                                            pgrpo_dataset_t** out);
PGRPO_API pgrpo_status_t pgrpo_dataset_write(const pgrpo_dataset_t* dataset,
                                             const char* path);
PGRPO_API int64_t pgrpo_dataset_size(const pgrpo_dataset_t* dataset);
/* Summary statistics as "metric,value" CSV. */
PGRPO_API pgrpo_status_t pgrpo_dataset_stats_csv(const pgrpo_dataset_t* dataset,
                                                 char** csv_out);
PGRPO_API void pgrpo_dataset_free(pgrpo_dataset_t* dataset);

/* ---- policy ---- */
PGRPO_API pgrpo_status_t pgrpo_policy_create(uint64_t seed, pgrpo_policy_t** out);
PGRPO_API pgrpo_status_t pgrpo_policy_load(const char* path, pgrpo_policy_t** out);
PGRPO_API pgrpo_status_t pgrpo_policy_save(const pgrpo_policy_t* policy,
                                           const char* path);
PGRPO_API void pgrpo_policy_free(pgrpo_policy_t* policy);

/* ---- training ----
 * Configs are JSON documents; see the README for the field reference.
 * Both runs mutate the policy in place. log_csv_out may be NULL.
 */
PGRPO_API pgrpo_status_t pgrpo_sft_run(pgrpo_policy_t* policy,
                                       const pgrpo_dataset_t* dataset,
                                       const char* sft_config_json,
                                       char** log_csv_out);
PGRPO_API pgrpo_status_t pgrpo_train_run(pgrpo_policy_t* policy,
                                         const pgrpo_dataset_t* dataset,
                                         const char* train_config_json,
                                         char** log_csv_out,
                                         char** reward_log_csv_out);

/* ---- evaluation ----
 * judge_url NULL selects the built-in exact-match judge; otherwise answers
 * are scored by POST <judge_url>/score.
 */
PGRPO_API pgrpo_status_t pgrpo_eval_polluted(const pgrpo_policy_t* policy,
                                             const pgrpo_dataset_t* dataset,
                                             int k_max, uint64_t seed,
                                             const char* judge_url,
                                             int judge_timeout_ms,
                                             char** series_csv_out);
PGRPO_API pgrpo_status_t pgrpo_eval_topk(const pgrpo_policy_t* policy,
                                         const pgrpo_dataset_t* dataset, int k,
                                         const char* judge_url,
                                         int judge_timeout_ms,
                                         double* accuracy_out);

/* ---- metrics ----
 * acc holds ACC_{+0}..ACC_{+len-1} percentages. table_mode nonzero selects
 * the published-table convention, zero the per-definition equations.
 */
PGRPO_API pgrpo_status_t pgrpo_metrics_mean_accuracy(const double* acc,
                                                     int64_t len, int k,
                                                     int table_mode,
                                                     double* out);
PGRPO_API pgrpo_status_t pgrpo_metrics_degradation(const double* acc,
                                                   int64_t len, int k,
                                                   int table_mode, double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PGRPO_PGRPO_H_ */
