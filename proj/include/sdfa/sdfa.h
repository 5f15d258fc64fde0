#ifndef SDFA_SDFA_H
#define SDFA_SDFA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SDFA_API __declspec(dllexport)
#else
#define SDFA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sdfa_status {
  SDFA_OK = 0,
  SDFA_ERR_VALIDATION = 1, /* bad input, argument, shape or state */
  SDFA_ERR_IO = 2,         /* missing or malformed file */
  SDFA_ERR_NUMERIC = 3     /* training diverged */
} sdfa_status;

typedef struct sdfa_dataset sdfa_dataset;

typedef struct sdfa_dataset_info {
  int64_t n_instances;
  int64_t d_x;
  int64_t d_a;
  int64_t n_seen_classes;
  int64_t n_unseen_classes;
  int has_embeddings;
} sdfa_dataset_info;

typedef struct sdfa_metrics {
  double U;
  double S;
  double H;
  double self_sup_accuracy;
} sdfa_metrics;

SDFA_API const char* sdfa_version(void);

/* Message of the last failed call on this thread; "" when none. */
SDFA_API const char* sdfa_last_error(void);

/* spec_json may be NULL or "{}" for defaults. Writes the manifest path into
   manifest_out (NUL-terminated, truncated to cap) when non-NULL. */
SDFA_API sdfa_status sdfa_make_synthetic(const char* spec_json, const char* out_dir, char* manifest_out, size_t cap);

SDFA_API sdfa_status sdfa_dataset_load(const char* manifest_path, sdfa_dataset** out);
SDFA_API void sdfa_dataset_free(sdfa_dataset* ds);
SDFA_API sdfa_status sdfa_dataset_info_get(const sdfa_dataset* ds, sdfa_dataset_info* out);
SDFA_API sdfa_status sdfa_dataset_save(const sdfa_dataset* ds, const char* out_dir);

/* config_json holds the experiment configuration object. */
SDFA_API sdfa_status sdfa_cluster(const char* config_json);
SDFA_API sdfa_status sdfa_run(const char* config_json, sdfa_metrics* out);
SDFA_API sdfa_status sdfa_ablate(const char* config_json, int n_seeds);
SDFA_API sdfa_status sdfa_sweep(const char* config_json, const char* param, const double* values, size_t n_values,
                                int n_seeds);
SDFA_API sdfa_status sdfa_report(const char* run_dir);

SDFA_API sdfa_status sdfa_harmonic_mean(double seen, double unseen, double* out);

#ifdef __cplusplus
}
#endif

#endif
