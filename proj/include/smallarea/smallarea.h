/*
 * smallarea C API.
 *
 * Small-area count estimation: stratified expansion estimates with finite
 * population correction, tract-level imputation (stratum means, matching,
 * random forests), area-share aggregation, and an aggregation-accuracy study.
 *
 * Every function returns an sa_status. On failure, sa_last_error() returns a
 * one-line message for the calling thread, valid until that thread's next
 * call into the library. Handles are opaque and must be released with the
 * matching *_free function; *_free accepts NULL. A handle may be read from
 * several threads at once but not modified concurrently.
 */
#ifndef SMALLAREA_SMALLAREA_H
#define SMALLAREA_SMALLAREA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SMALLAREA_BUILDING_LIBRARY)
#    define SA_API __declspec(dllexport)
#  else
#    define SA_API __declspec(dllimport)
#  endif
#else
#  define SA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sa_status {
  SA_OK = 0,
  SA_ERR_INVALID_ARGUMENT = 1,
  SA_ERR_SCHEMA = 2,             /* malformed or invalid input file */
  SA_ERR_INFEASIBLE = 3,         /* design or computation cannot be carried out */
  SA_ERR_MISSING_PREDICTION = 4, /* a tract lacks a required model value */
  SA_ERR_IO = 5,
  SA_ERR_INTERNAL = 6
} sa_status;

typedef enum sa_ambiguity_policy {
  SA_AMBIGUITY_DROP = 0, /* blank count on a sampled tract: leave it out of n */
  SA_AMBIGUITY_ZERO = 1  /* blank count on a sampled tract: count it as 0 */
} sa_ambiguity_policy;

typedef enum sa_usol_denominator {
  SA_USOL_SUBGROUP = 0, /* US over small draws, OL over large draws */
  SA_USOL_ALL = 1       /* both over all draws */
} sa_usol_denominator;

typedef struct sa_dataset sa_dataset;
typedef struct sa_predictions sa_predictions;
typedef struct sa_forest sa_forest;

SA_API const char* sa_version(void);
SA_API const char* sa_last_error(void);
SA_API const char* sa_status_name(sa_status status);

/* ---- design-based estimation ------------------------------------------ */

SA_API sa_status sa_expansion_total(const int64_t* counts, size_t n, int64_t frame_size, double* out);
/* Plug-in variance with divisor n. */
SA_API sa_status sa_count_variance(const int64_t* counts, size_t n, double* out);
SA_API sa_status sa_total_variance(double count_variance, int64_t frame_size, int64_t sample_size, double* out);

/* ---- survey data ------------------------------------------------------- */

/* shelters_path and shares_path may be NULL. */
SA_API sa_status sa_dataset_load(const char* tracts_path, const char* shelters_path, const char* shares_path,
                                 sa_ambiguity_policy policy, sa_dataset** out);
SA_API void sa_dataset_free(sa_dataset* dataset);
SA_API size_t sa_dataset_tract_count(const sa_dataset* dataset);
SA_API sa_status sa_dataset_write_tracts(const sa_dataset* dataset, const char* path);

/* ---- synthetic counties ------------------------------------------------ */

typedef struct sa_synth_options {
  uint64_t seed;
  size_t n_tracts;
  size_t n_strata;
  int64_t total_sample;
  double certainty_fraction;
  int noisy_certainty; /* nonzero: rank certainty tracts on perturbed counts */
  const char* config_path; /* optional JSON overrides; NULL for none */
} sa_synth_options;

SA_API void sa_synth_options_init(sa_synth_options* options);
/* Writes tracts.csv, shelters.csv, city_shares.csv and truth.csv into out_dir. */
SA_API sa_status sa_synth_write(const sa_synth_options* options, const char* out_dir);

/* ---- sampling design --------------------------------------------------- */

/* Proportional allocation + stratified SRS; writes stratum_id,N,n,tract_id. */
SA_API sa_status sa_design_write(const sa_dataset* dataset, int64_t total_sample, uint64_t seed,
                                 const char* plan_path);

/* ---- estimation report ------------------------------------------------- */

/* Writes the per-stratum table; county_total / county_se may be NULL.
 * county_se is set to NaN when a stratum lacks a variance estimate. */
SA_API sa_status sa_estimate_write(const sa_dataset* dataset, const char* table_path, double* county_total,
                                   double* county_se);

/* ---- imputation -------------------------------------------------------- */

typedef struct sa_impute_options {
  uint64_t seed;
  const char* model_config_path; /* JSON model list; NULL runs Models 0-3 */
  size_t n_trees;                /* 0 keeps the configured value */
  size_t mtry;                   /* 0 keeps the configured value */
  size_t min_node_size;          /* 0 keeps the configured value */
  size_t n_threads;              /* 0 or 1: single-threaded */
} sa_impute_options;

SA_API void sa_impute_options_init(sa_impute_options* options);
SA_API sa_status sa_impute(const sa_dataset* dataset, const sa_impute_options* options, sa_predictions** out);
SA_API sa_status sa_predictions_load(const char* path, sa_predictions** out);
SA_API sa_status sa_predictions_write(const sa_predictions* predictions, const char* path);
SA_API void sa_predictions_free(sa_predictions* predictions);
SA_API size_t sa_predictions_model_count(const sa_predictions* predictions);
/* Returns NULL when index is out of range. */
SA_API const char* sa_predictions_model_name(const sa_predictions* predictions, size_t index);

/* ---- aggregation ------------------------------------------------------- */

/* Strata, county "Total", then cities from the dataset's share file. */
SA_API sa_status sa_aggregate_write(const sa_dataset* dataset, const sa_predictions* predictions,
                                    const char* regions_path);

/* ---- aggregation study ------------------------------------------------- */

typedef struct sa_validate_options {
  uint64_t seed;
  size_t draws;
  const size_t* sizes; /* NULL: 4, 8, 16, 32, 64 */
  size_t n_sizes;
  const char* const* excluded_strata;
  size_t n_excluded_strata;
  sa_usol_denominator denominator;
  int include_seed_tract; /* nonzero: the geographic seed tract may be drawn */
} sa_validate_options;

SA_API void sa_validate_options_init(sa_validate_options* options);
SA_API sa_status sa_validate_write(const sa_dataset* dataset, const sa_predictions* predictions,
                                   const sa_validate_options* options, const char* table_path);

/* ---- random forests ---------------------------------------------------- */

typedef struct sa_forest_params {
  size_t n_trees;
  size_t mtry; /* 0: ceil(p / 3) */
  size_t min_node_size;
  uint64_t seed;
  size_t n_threads;
} sa_forest_params;

SA_API void sa_forest_params_init(sa_forest_params* params);
/* x is row-major rows x cols. */
SA_API sa_status sa_forest_fit(const double* x, size_t rows, size_t cols, const double* y,
                               const sa_forest_params* params, sa_forest** out);
SA_API void sa_forest_free(sa_forest* forest);
SA_API size_t sa_forest_tree_count(const sa_forest* forest);
SA_API sa_status sa_forest_predict(const sa_forest* forest, const double* x, size_t cols, double* out);
/* Out-of-bag fitted values for the training rows. no_oob may be NULL; when
 * given, no_oob[i] is set to 1 for rows no tree left out. */
SA_API sa_status sa_forest_oob(const sa_forest* forest, const double* x, size_t rows, size_t cols, double* fitted,
                               int* no_oob);
SA_API sa_status sa_forest_save(const sa_forest* forest, const char* path);
SA_API sa_status sa_forest_load(const char* path, sa_forest** out);

#ifdef __cplusplus
}
#endif

#endif /* SMALLAREA_SMALLAREA_H */
