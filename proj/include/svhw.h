/* survwalk C API: survival-aware VAE training and HazardWalk latent
 * traversal behind opaque handles.
 *
 * Every function that can fail returns an svhw_status; on failure the
 * thread-local message from svhw_last_error() describes what went wrong.
 * Handles returned through out-parameters are owned by the caller and
 * released with the matching *_free function.
 */
#ifndef SVHW_H
#define SVHW_H

#include <stddef.h>

#if defined(_WIN32)
#define SVHW_API __declspec(dllexport)
#else
#define SVHW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum svhw_status {
    SVHW_OK = 0,
    SVHW_ERR_INVALID = 1,  /* bad argument: shape, range, unknown key, null handle */
    SVHW_ERR_DATA = 2,     /* malformed or inconsistent file contents */
    SVHW_ERR_IO = 3,       /* filesystem failure */
    SVHW_ERR_INTERNAL = 4  /* unexpected failure */
} svhw_status;

typedef struct svhw_config svhw_config;   /* run + simulation configuration */
typedef struct svhw_dataset svhw_dataset; /* survival records */
typedef struct svhw_model svhw_model;     /* trained parameters + optimizer state */
typedef struct svhw_walk svhw_walk;       /* one HazardWalk trajectory */

SVHW_API const char* svhw_version(void);
SVHW_API const char* svhw_status_name(svhw_status status);
/* message from the most recent failing call on this thread; never NULL */
SVHW_API const char* svhw_last_error(void);

/* ---- configuration ----------------------------------------------------- */

/* all defaults */
SVHW_API svhw_status svhw_config_create(svhw_config** out);
/* parse a structured-text config file */
SVHW_API svhw_status svhw_config_read(const char* path, svhw_config** out);
/* dotted keys, e.g. "tau", "epochs", "simulation.base_rate" */
SVHW_API svhw_status svhw_config_set(svhw_config* config, const char* key, const char* value);
/* copies the value at key into buffer (NUL-terminated); fails if unknown or
 * if buffer_len is too small */
SVHW_API svhw_status svhw_config_get(const svhw_config* config, const char* key, char* buffer,
                                     size_t buffer_len);
SVHW_API void svhw_config_free(svhw_config* config);

/* ---- datasets ---------------------------------------------------------- */

SVHW_API svhw_status svhw_simulate(const svhw_config* config, svhw_dataset** out);
SVHW_API svhw_status svhw_dataset_from_idx(const char* image_path, const char* label_path,
                                           const svhw_config* config, svhw_dataset** out);
SVHW_API svhw_status svhw_dataset_read(const char* path, svhw_dataset** out);
SVHW_API svhw_status svhw_dataset_write(const svhw_dataset* dataset, const char* path);
SVHW_API svhw_status svhw_dataset_size(const svhw_dataset* dataset, size_t* out);
SVHW_API void svhw_dataset_free(svhw_dataset* dataset);

/* ---- training ---------------------------------------------------------- */

typedef void (*svhw_log_fn)(unsigned long long epoch, double joint, double elbo, double cox,
                            void* user);

/* initialize from config and run config.epochs epochs */
SVHW_API svhw_status svhw_train(const svhw_config* config, const svhw_dataset* dataset,
                                svhw_log_fn log, void* user, svhw_model** out);
/* run additional epochs on an existing model (resume) */
SVHW_API svhw_status svhw_train_continue(svhw_model* model, const svhw_dataset* dataset,
                                         unsigned epochs, svhw_log_fn log, void* user);
SVHW_API svhw_status svhw_model_read(const char* path, svhw_model** out);
SVHW_API svhw_status svhw_model_write(const svhw_model* model, const char* path);
SVHW_API void svhw_model_free(svhw_model* model);

/* ---- embedding and evaluation ------------------------------------------ */

/* one CSV row per record: id,mu_1..,sigma_1..,risk,time,event,class */
SVHW_API svhw_status svhw_embed_csv(const svhw_model* model, const svhw_dataset* dataset,
                                    const char* csv_path);

typedef struct svhw_eval_report {
    double c_index;
    double hazard_rank_agreement;
    double mean_reconstruction_nll;
} svhw_eval_report;

SVHW_API svhw_status svhw_evaluate(const svhw_model* model, const svhw_dataset* dataset,
                                   svhw_eval_report* out);

/* cohort mean risk score psi . mu over the dataset (for hazard centering) */
SVHW_API svhw_status svhw_mean_risk(const svhw_model* model, const svhw_dataset* dataset,
                                    double* out);

/* ---- HazardWalk --------------------------------------------------------- */

typedef struct svhw_walk_options {
    unsigned iterations;     /* default 1500 */
    unsigned mc_samples;     /* default 128 */
    double step_size;        /* default 1e-2 */
    int decrease;            /* 0 = increase (default), 1 = decrease */
    unsigned snapshot_every; /* default 100 */
    int monte_carlo;         /* 0 = closed_form (default), 1 = monte_carlo */
    unsigned long long seed; /* default 0 */
} svhw_walk_options;

SVHW_API void svhw_walk_options_init(svhw_walk_options* options);

/* walk from the dataset record at index */
SVHW_API svhw_status svhw_walk_run(const svhw_model* model, const svhw_dataset* dataset,
                                   size_t index, const svhw_walk_options* options,
                                   svhw_walk** out);
/* number of recorded iterations (iterations + 1 unless stationary) */
SVHW_API svhw_status svhw_walk_length(const svhw_walk* walk, size_t* out);
SVHW_API svhw_status svhw_walk_hazard_at(const svhw_walk* walk, size_t i, double* out);
/* 1 if the walk stopped on a zero gradient */
SVHW_API svhw_status svhw_walk_stationary(const svhw_walk* walk, int* out);
/* writes trajectory.csv, frame_NNNNNN.pgm per snapshot, and grid.pgm into
 * an existing directory */
SVHW_API svhw_status svhw_walk_export(const svhw_walk* walk, const char* directory);
SVHW_API void svhw_walk_free(svhw_walk* walk);

#ifdef __cplusplus
}
#endif

#endif /* SVHW_H */
