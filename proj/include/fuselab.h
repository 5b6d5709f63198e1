/*
 * fuselab — one-shot federated model fusion simulator.
 *
 * C interface to the shared library. All functions return a status code;
 * on failure, fuselab_last_error() gives a thread-local message. Objects
 * are opaque handles released with the matching _free call. Handles are
 * immutable after creation and safe to share across threads.
 */
#ifndef FUSELAB_H
#define FUSELAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FUSELAB_API __declspec(dllexport)
#else
#define FUSELAB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fuselab_status {
    FUSELAB_OK = 0,
    FUSELAB_ERR_INVALID_ARGUMENT = 1, /* null pointer or contract violation */
    FUSELAB_ERR_FORMAT = 2,           /* unparseable or inconsistent file */
    FUSELAB_ERR_IO = 3,               /* filesystem failure */
    FUSELAB_ERR_TRAINING = 4,         /* optimization diverged */
    FUSELAB_ERR_CONFIG = 5,           /* bad experiment configuration */
    FUSELAB_ERR_INTERNAL = 6
} fuselab_status;

/* Message for the most recent failure on this thread; never NULL. */
FUSELAB_API const char* fuselab_last_error(void);

FUSELAB_API const char* fuselab_version(void);

/* Worker cap for parallel training (0 = hardware default). */
FUSELAB_API void fuselab_set_threads(int n);
/* Directory holding the MNIST IDX files; overrides $FUSELAB_DATA_DIR. */
FUSELAB_API void fuselab_set_data_dir(const char* dir);

/* ------------------------------------------------------------------ */
/* datasets                                                            */

typedef struct fuselab_dataset fuselab_dataset;

enum { FUSELAB_SIDE_LEFT = 0, FUSELAB_SIDE_RIGHT = 1 };
enum { FUSELAB_ROLE_TRAIN = 0, FUSELAB_ROLE_TEST = 1 };

FUSELAB_API fuselab_status fuselab_dataset_diamond2d(int side, int64_t n_train, int64_t n_test,
                                                     uint64_t seed, fuselab_dataset** out_train,
                                                     fuselab_dataset** out_test);
FUSELAB_API fuselab_status fuselab_dataset_load_mnist(const char* images_path,
                                                      const char* labels_path, int role,
                                                      fuselab_dataset** out);
FUSELAB_API fuselab_status fuselab_dataset_merge(const fuselab_dataset* a, const fuselab_dataset* b,
                                                 fuselab_dataset** out);
FUSELAB_API fuselab_status fuselab_dataset_subset(const fuselab_dataset* ds,
                                                  const int64_t* indices, size_t count,
                                                  fuselab_dataset** out);
FUSELAB_API fuselab_status fuselab_dataset_size(const fuselab_dataset* ds, int64_t* out);
FUSELAB_API fuselab_status fuselab_dataset_feature_width(const fuselab_dataset* ds, int64_t* out);
FUSELAB_API fuselab_status fuselab_dataset_class_count(const fuselab_dataset* ds, int* out);
FUSELAB_API fuselab_status fuselab_dataset_label(const fuselab_dataset* ds, int64_t row, int* out);
FUSELAB_API fuselab_status fuselab_dataset_export_csv(const fuselab_dataset* ds, const char* path);
FUSELAB_API void fuselab_dataset_free(fuselab_dataset* ds);

/* ------------------------------------------------------------------ */
/* partitions                                                          */

typedef struct fuselab_partition fuselab_partition;

FUSELAB_API fuselab_status fuselab_partition_hetero_label(const fuselab_dataset* ds, int clients,
                                                          uint64_t seed, int disjoint,
                                                          fuselab_partition** out);
FUSELAB_API fuselab_status fuselab_partition_hetero_dir(const fuselab_dataset* ds, int clients,
                                                        double alpha, uint64_t seed,
                                                        fuselab_partition** out);
FUSELAB_API fuselab_status fuselab_partition_clients(const fuselab_partition* p, int* out);
FUSELAB_API fuselab_status fuselab_partition_client_size(const fuselab_partition* p, int client,
                                                         int64_t* out);
/* Copies up to capacity indices; *written reports how many. */
FUSELAB_API fuselab_status fuselab_partition_client_indices(const fuselab_partition* p, int client,
                                                            int64_t* buffer, size_t capacity,
                                                            size_t* written);
FUSELAB_API void fuselab_partition_free(fuselab_partition* p);

/* ------------------------------------------------------------------ */
/* models and training                                                 */

typedef struct fuselab_model fuselab_model;

enum { FUSELAB_ACT_RELU = 0, FUSELAB_ACT_LEAKY_RELU = 1 };

typedef struct fuselab_train_config {
    double learning_rate;
    double decay_factor;
    int decay_period_epochs;
    int batch_size;
    int epochs;
    double l1_coefficient;
    uint64_t seed;
} fuselab_train_config;

/* The MNIST MLP recipe: Adam 0.001 with 0.8 decay every 2 epochs, batch 64,
 * 40 epochs, L1 1e-7. */
FUSELAB_API fuselab_train_config fuselab_train_config_default(void);

FUSELAB_API fuselab_status fuselab_train(const fuselab_dataset* ds, const int64_t* hidden_widths,
                                         size_t depth, int activation,
                                         const fuselab_train_config* cfg, fuselab_model** out);
FUSELAB_API fuselab_status fuselab_model_save(const fuselab_model* m, const char* path);
FUSELAB_API fuselab_status fuselab_model_load(const char* path, fuselab_model** out);
FUSELAB_API fuselab_status fuselab_model_forward_logits(const fuselab_model* m, const double* x,
                                                        size_t width, double* out_logits,
                                                        size_t capacity);
FUSELAB_API fuselab_status fuselab_model_accuracy(const fuselab_model* m,
                                                  const fuselab_dataset* test, double* out);
FUSELAB_API fuselab_status fuselab_model_class_count(const fuselab_model* m, int* out);
FUSELAB_API void fuselab_model_free(fuselab_model* m);

/* ------------------------------------------------------------------ */
/* fusion                                                              */

enum {
    FUSELAB_METHOD_CONCAT_DIRECT = 0,
    FUSELAB_METHOD_FEDAVG = 1,
    FUSELAB_METHOD_ENSEMBLE_UNIFORM = 2,
    FUSELAB_METHOD_AMS_TOP1 = 3,
    FUSELAB_METHOD_AMS_TOPK = 4,
    FUSELAB_METHOD_AMS_FULL = 5,
    FUSELAB_METHOD_AMS_CROSS = 6
};

/* Coordinate-wise average; sample_counts may be NULL for uniform weights. */
FUSELAB_API fuselab_status fuselab_fuse_fedavg(const fuselab_model* const* models, size_t count,
                                               const int64_t* sample_counts, fuselab_model** out);
FUSELAB_API fuselab_status fuselab_fuse_concat(const fuselab_model* const* models, size_t count,
                                               fuselab_model** out);
/* Accuracy of a fusion method over a test set (k used by AMS_TOPK only). */
FUSELAB_API fuselab_status fuselab_eval_method(const fuselab_model* const* models, size_t count,
                                               int method, int k, const fuselab_dataset* test,
                                               double* out_accuracy);
/* C x count pre-softmax logits for one input, column-major per model
 * (out[c * count + j] = logit of class c under model j). */
FUSELAB_API fuselab_status fuselab_disturbing_matrix(const fuselab_model* const* models,
                                                     size_t count, const double* x, size_t width,
                                                     double* out, size_t capacity);
FUSELAB_API fuselab_status fuselab_export_disturbing_csv(const fuselab_model* const* models,
                                                         size_t count, const fuselab_dataset* ds,
                                                         const char* path);

/* ------------------------------------------------------------------ */
/* experiments                                                         */

typedef struct fuselab_results fuselab_results;

typedef struct fuselab_result_row {
    char dataset[16];
    char partition[16];
    double alpha; /* NaN when not applicable */
    int clients;
    char depth[8];
    char method[24];
    int trial;
    uint64_t seed;
    double accuracy;
    double wall_ms;
} fuselab_result_row;

FUSELAB_API fuselab_status fuselab_run_config_text(const char* text, fuselab_results** out);
FUSELAB_API fuselab_status fuselab_run_config_file(const char* path, fuselab_results** out);
FUSELAB_API fuselab_status fuselab_run_sweep(const char* config_path, const double* alphas,
                                             size_t count, fuselab_results** out);
FUSELAB_API fuselab_status fuselab_results_count(const fuselab_results* r, size_t* out);
FUSELAB_API fuselab_status fuselab_results_get(const fuselab_results* r, size_t index,
                                               fuselab_result_row* out);
FUSELAB_API fuselab_status fuselab_results_save_csv(const fuselab_results* r, const char* path);
FUSELAB_API fuselab_status fuselab_results_save_jsonl(const fuselab_results* r, const char* path);
FUSELAB_API fuselab_status fuselab_results_load_csv(const char* path, fuselab_results** out);
FUSELAB_API void fuselab_results_free(fuselab_results* r);

/* Aligned mean +- std table per setting and method, written into a
 * malloc'd string released with fuselab_string_free. Optionally also
 * writes the grouped summary as CSV. */
FUSELAB_API fuselab_status fuselab_summarize_csv(const char* records_csv_path,
                                                 const char* summary_csv_path_or_null,
                                                 char** out_table);
FUSELAB_API void fuselab_string_free(char* s);

/* ------------------------------------------------------------------ */
/* the 2D two-client demonstration                                     */

typedef struct fuselab_demo_row {
    uint64_t seed;
    double acc_left;
    double acc_right;
    double acc_global;
    /* 0 success, 1 fail, 2 neither, 3 diverged */
    int outcome;
} fuselab_demo_row;

FUSELAB_API fuselab_status fuselab_run_demo2d(const uint64_t* seeds, size_t count,
                                              fuselab_demo_row* out_rows);
FUSELAB_API fuselab_status fuselab_demo2d_export_data(uint64_t seed, const char* directory);

#ifdef __cplusplus
}
#endif

#endif /* FUSELAB_H */
