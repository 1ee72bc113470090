/* C interface to the cornet library. Every call returns a cornet_status; on failure the
   message of the most recent error on the calling thread is available from cornet_last_error. */
#ifndef CORNET_CORNET_H
#define CORNET_CORNET_H

#include <stddef.h>
#include <stdint.h>

#if defined(CORNET_BUILDING_LIBRARY)
#define CORNET_API __attribute__((visibility("default")))
#else
#define CORNET_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cornet_status {
    CORNET_OK = 0,
    CORNET_E_INVALID_ARGUMENT,
    CORNET_E_SHAPE_MISMATCH,
    CORNET_E_DIMENSION_MISMATCH,
    CORNET_E_INVALID_DIMENSION,
    CORNET_E_NOT_SYMMETRIC,
    CORNET_E_NOT_POSITIVE_DEFINITE,
    CORNET_E_NON_POSITIVE_DIAGONAL,
    CORNET_E_NOT_CORRELATION,
    CORNET_E_BAD_DIAGONAL,
    CORNET_E_SINGULAR_FACTOR,
    CORNET_E_SINGULAR_MATRIX,
    CORNET_E_SINGULAR_H0,
    CORNET_E_NO_CONVERGENCE,
    CORNET_E_DAMPING_FAILURE,
    CORNET_E_UNSUPPORTED,
    CORNET_E_INFEASIBLE_SEPARATION,
    CORNET_E_CONFIG,
    CORNET_E_IO,
    CORNET_E_BUFFER_TOO_SMALL,
    CORNET_E_INTERNAL
} cornet_status;

typedef enum cornet_metric {
    CORNET_ECM = 0,
    CORNET_LECM = 1,
    CORNET_OLM = 2,
    CORNET_LSM = 3,
    CORNET_PHCM = 4
} cornet_metric;

typedef struct cornet_config cornet_config;
typedef struct cornet_dataset cornet_dataset;
typedef struct cornet_model cornet_model;
typedef struct cornet_tensor cornet_tensor;

/* ---- errors ---- */

CORNET_API const char* cornet_last_error(void);
CORNET_API const char* cornet_status_name(cornet_status s);
/* 0 success, 1 usage/config, 2 numerical failure, 3 I/O. */
CORNET_API int cornet_exit_code(cornet_status s);

/* ---- metrics ---- */

CORNET_API const char* cornet_metric_name(cornet_metric m);
/* Case-insensitive. */
CORNET_API cornet_status cornet_metric_parse(const char* name, cornet_metric* out);

/* ---- configuration ---- */

CORNET_API cornet_status cornet_config_default(cornet_config** out);
CORNET_API cornet_status cornet_config_parse(const char* text, cornet_config** out);
CORNET_API cornet_status cornet_config_load(const char* path, cornet_config** out);
/* Sets one key as if it appeared in the config file; the result is validated. */
CORNET_API cornet_status cornet_config_set(cornet_config* cfg, const char* key, const char* value);
/* Writes the `key = value` text into buf (NUL-terminated); *needed gets the full size including the NUL. */
CORNET_API cornet_status cornet_config_text(const cornet_config* cfg, char* buf, size_t cap, size_t* needed);
CORNET_API uint64_t cornet_config_seed(const cornet_config* cfg);
CORNET_API void cornet_config_free(cornet_config* cfg);

/* ---- datasets ---- */

typedef struct cornet_datagen_params {
    size_t classes;
    size_t per_class;
    size_t dim;
    size_t channels;
    double spread;
    double sep;
    uint64_t seed;
    int has_sample_seed;
    uint64_t sample_seed;
} cornet_datagen_params;

CORNET_API void cornet_datagen_defaults(cornet_datagen_params* p);
CORNET_API cornet_status cornet_datagen(const cornet_datagen_params* p, cornet_dataset** out);
CORNET_API cornet_status cornet_dataset_read(const char* dir, cornet_dataset** out);
CORNET_API cornet_status cornet_dataset_write(const cornet_dataset* d, const char* dir);
CORNET_API size_t cornet_dataset_size(const cornet_dataset* d);
CORNET_API size_t cornet_dataset_channels(const cornet_dataset* d);
CORNET_API size_t cornet_dataset_dim(const cornet_dataset* d);
CORNET_API void cornet_dataset_free(cornet_dataset* d);

/* ---- models ---- */

typedef struct cornet_epoch_metrics {
    size_t epoch;
    double loss;
    double acc;
    double seconds;
} cornet_epoch_metrics;

/* Return nonzero to continue training. */
typedef int (*cornet_epoch_callback)(const cornet_epoch_metrics* m, void* user);

CORNET_API cornet_status cornet_model_init(const cornet_config* cfg, cornet_model** out);
CORNET_API cornet_status cornet_model_load(const char* dir, cornet_model** out);
CORNET_API cornet_status cornet_model_save(const cornet_model* m, const char* dir);
CORNET_API size_t cornet_model_classes(const cornet_model* m);
/* Copies the model's configuration. */
CORNET_API cornet_status cornet_model_config(const cornet_model* m, cornet_config** out);
CORNET_API void cornet_model_free(cornet_model* m);

/* Trains in place for the configured epochs. If metrics_csv is not NULL each epoch is appended to it. */
CORNET_API cornet_status cornet_train(cornet_model* m, const cornet_dataset* d, const char* metrics_csv,
                                      cornet_epoch_callback cb, void* user);

/* confusion (optional) receives classes x classes counts, row = true class. */
CORNET_API cornet_status cornet_evaluate(const cornet_model* m, const cornet_dataset* d, double* loss,
                                         double* accuracy, size_t* confusion, size_t confusion_cap);

/* sample: channels x n x n row-major; logits receives `classes` values. */
CORNET_API cornet_status cornet_model_logits(const cornet_model* m, const double* sample, size_t channels, size_t n,
                                             double* logits, size_t cap);

/* ---- diagnostics ---- */

typedef struct cornet_block_error {
    char name[32];
    size_t size;
    double rel_error;
} cornet_block_error;

/* Fills up to cap blocks; *count gets the number of blocks. *passed is 1 if every block is below 1e-4. */
CORNET_API cornet_status cornet_gradcheck(const cornet_config* cfg, uint64_t seed, cornet_block_error* out,
                                          size_t cap, size_t* count, int* passed);

typedef struct cornet_bench_row {
    cornet_metric metric;
    size_t n;
    size_t repeats;
    double mean_seconds;
    double stddev_seconds;
} cornet_bench_row;

CORNET_API cornet_status cornet_bench(const cornet_metric* metrics, size_t n_metrics, const size_t* dims,
                                      size_t n_dims, size_t repeats, uint64_t seed, cornet_bench_row* out,
                                      size_t cap, size_t* count);

typedef struct cornet_hyperplane_row {
    double r21, r31, r32, v;
} cornet_hyperplane_row;

/* Pass out = NULL to query the row count. */
CORNET_API cornet_status cornet_hyperplane(cornet_metric metric, const double* z, const size_t* z_shape,
                                           size_t z_ndim, double gamma, size_t grid, cornet_hyperplane_row* out,
                                           size_t cap, size_t* count);

/* ---- tensor files ---- */

CORNET_API cornet_status cornet_tensor_create(const uint32_t* shape, size_t ndim, const double* data,
                                              cornet_tensor** out);
CORNET_API cornet_status cornet_tensor_read(const char* path, cornet_tensor** out);
CORNET_API cornet_status cornet_tensor_write(const cornet_tensor* t, const char* path);
CORNET_API size_t cornet_tensor_ndim(const cornet_tensor* t);
CORNET_API uint32_t cornet_tensor_dim(const cornet_tensor* t, size_t axis);
CORNET_API size_t cornet_tensor_numel(const cornet_tensor* t);
CORNET_API const double* cornet_tensor_data(const cornet_tensor* t);
CORNET_API void cornet_tensor_free(cornet_tensor* t);

#ifdef __cplusplus
}
#endif

#endif
