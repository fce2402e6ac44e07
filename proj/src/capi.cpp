#include "svhw.h"

#include <cstdio>
#include <cstring>
#include <exception>
#include <string>

#include "survwalk/config.hpp"
#include "survwalk/coxhead.hpp"
#include "survwalk/dataset.hpp"
#include "survwalk/error.hpp"
#include "survwalk/evalkit.hpp"
#include "survwalk/hazardwalk.hpp"
#include "survwalk/model.hpp"
#include "survwalk/pgm.hpp"

using namespace survwalk;

struct svhw_config {
    Kv kv;
};

struct svhw_dataset {
    SurvivalDataset data;
};

struct svhw_model {
    ModelState state;
};

struct svhw_walk {
    WalkTrajectory trajectory;
    size_t image_rows = 0;
    size_t image_cols = 0;
};

namespace {

thread_local std::string g_last_error;

svhw_status to_status(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument: return SVHW_ERR_INVALID;
        case ErrorKind::data_format: return SVHW_ERR_DATA;
        case ErrorKind::io: return SVHW_ERR_IO;
    }
    return SVHW_ERR_INTERNAL;
}

// Runs fn under the C boundary: exceptions become status codes and the
// thread-local message.
template <typename Fn>
svhw_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SVHW_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return to_status(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SVHW_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return SVHW_ERR_INTERNAL;
    }
}

svhw_status fail_null(const char* what) {
    g_last_error = std::string(what) + " must not be NULL";
    return SVHW_ERR_INVALID;
}

RunConfig run_config_of(const svhw_config* config) {
    RunConfig rc = RunConfig::from_kv(config->kv);
    rc.validate();
    return rc;
}

LogFn wrap_log(svhw_log_fn log, void* user) {
    if (!log) return {};
    return [log, user](const EpochLog& e) { log(e.epoch, e.joint, e.elbo, e.cox, user); };
}

}  // namespace

extern "C" {

const char* svhw_version(void) { return "0.1.0"; }

const char* svhw_status_name(svhw_status status) {
    switch (status) {
        case SVHW_OK: return "ok";
        case SVHW_ERR_INVALID: return "invalid argument";
        case SVHW_ERR_DATA: return "data format error";
        case SVHW_ERR_IO: return "io error";
        case SVHW_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* svhw_last_error(void) { return g_last_error.c_str(); }

/* ---- configuration ----------------------------------------------------- */

svhw_status svhw_config_create(svhw_config** out) {
    if (!out) return fail_null("out");
    return guarded([&] { *out = new svhw_config{RunConfig{}.to_kv()}; });
}

svhw_status svhw_config_read(const char* path, svhw_config** out) {
    if (!path) return fail_null("path");
    if (!out) return fail_null("out");
    return guarded([&] {
        const RunConfig rc = RunConfig::load(path);
        *out = new svhw_config{rc.to_kv()};
    });
}

svhw_status svhw_config_set(svhw_config* config, const char* key, const char* value) {
    if (!config) return fail_null("config");
    if (!key) return fail_null("key");
    if (!value) return fail_null("value");
    return guarded([&] {
        if (!config->kv.has(key)) fail_invalid(std::string("unknown config key '") + key + "'");
        Kv next = config->kv;
        next.set(key, value);
        RunConfig::from_kv(next).validate();  // reject before mutating
        config->kv = std::move(next);
    });
}

svhw_status svhw_config_get(const svhw_config* config, const char* key, char* buffer,
                            size_t buffer_len) {
    if (!config) return fail_null("config");
    if (!key) return fail_null("key");
    if (!buffer) return fail_null("buffer");
    return guarded([&] {
        const std::string& value = config->kv.get(key);
        if (value.size() + 1 > buffer_len) {
            fail_invalid("buffer of " + std::to_string(buffer_len) + " bytes cannot hold " +
                         std::to_string(value.size() + 1));
        }
        std::memcpy(buffer, value.c_str(), value.size() + 1);
    });
}

void svhw_config_free(svhw_config* config) { delete config; }

/* ---- datasets ---------------------------------------------------------- */

svhw_status svhw_simulate(const svhw_config* config, svhw_dataset** out) {
    if (!config) return fail_null("config");
    if (!out) return fail_null("out");
    return guarded([&] { *out = new svhw_dataset{simulate(run_config_of(config).simulation)}; });
}

svhw_status svhw_dataset_from_idx(const char* image_path, const char* label_path,
                                  const svhw_config* config, svhw_dataset** out) {
    if (!image_path) return fail_null("image_path");
    if (!label_path) return fail_null("label_path");
    if (!config) return fail_null("config");
    if (!out) return fail_null("out");
    return guarded([&] {
        *out = new svhw_dataset{
            load_idx(image_path, label_path, run_config_of(config).simulation)};
    });
}

svhw_status svhw_dataset_read(const char* path, svhw_dataset** out) {
    if (!path) return fail_null("path");
    if (!out) return fail_null("out");
    return guarded([&] { *out = new svhw_dataset{SurvivalDataset::load(path)}; });
}

svhw_status svhw_dataset_write(const svhw_dataset* dataset, const char* path) {
    if (!dataset) return fail_null("dataset");
    if (!path) return fail_null("path");
    return guarded([&] { dataset->data.save(path); });
}

svhw_status svhw_dataset_size(const svhw_dataset* dataset, size_t* out) {
    if (!dataset) return fail_null("dataset");
    if (!out) return fail_null("out");
    *out = dataset->data.size();
    return SVHW_OK;
}

void svhw_dataset_free(svhw_dataset* dataset) { delete dataset; }

/* ---- training ---------------------------------------------------------- */

svhw_status svhw_train(const svhw_config* config, const svhw_dataset* dataset, svhw_log_fn log,
                       void* user, svhw_model** out) {
    if (!config) return fail_null("config");
    if (!dataset) return fail_null("dataset");
    if (!out) return fail_null("out");
    return guarded([&] {
        *out = new svhw_model{train(run_config_of(config), dataset->data, wrap_log(log, user))};
    });
}

svhw_status svhw_train_continue(svhw_model* model, const svhw_dataset* dataset, unsigned epochs,
                                svhw_log_fn log, void* user) {
    if (!model) return fail_null("model");
    if (!dataset) return fail_null("dataset");
    return guarded([&] { train_epochs(model->state, dataset->data, epochs, wrap_log(log, user)); });
}

svhw_status svhw_model_read(const char* path, svhw_model** out) {
    if (!path) return fail_null("path");
    if (!out) return fail_null("out");
    return guarded([&] { *out = new svhw_model{ModelState::load(path)}; });
}

svhw_status svhw_model_write(const svhw_model* model, const char* path) {
    if (!model) return fail_null("model");
    if (!path) return fail_null("path");
    return guarded([&] { model->state.save(path); });
}

void svhw_model_free(svhw_model* model) { delete model; }

/* ---- embedding and evaluation ------------------------------------------ */

svhw_status svhw_embed_csv(const svhw_model* model, const svhw_dataset* dataset,
                           const char* csv_path) {
    if (!model) return fail_null("model");
    if (!dataset) return fail_null("dataset");
    if (!csv_path) return fail_null("csv_path");
    return guarded([&] { embed_dataset(model->state, dataset->data).write_csv(csv_path); });
}

svhw_status svhw_evaluate(const svhw_model* model, const svhw_dataset* dataset,
                          svhw_eval_report* out) {
    if (!model) return fail_null("model");
    if (!dataset) return fail_null("dataset");
    if (!out) return fail_null("out");
    return guarded([&] {
        const EvalReport r = evaluate(model->state, dataset->data);
        out->c_index = r.c_index;
        out->hazard_rank_agreement = r.hazard_rank_agreement;
        out->mean_reconstruction_nll = r.mean_reconstruction_nll;
    });
}

svhw_status svhw_mean_risk(const svhw_model* model, const svhw_dataset* dataset, double* out) {
    if (!model) return fail_null("model");
    if (!dataset) return fail_null("dataset");
    if (!out) return fail_null("out");
    return guarded([&] {
        const EmbeddingTable table = embed_dataset(model->state, dataset->data);
        double acc = 0.0;
        for (const EmbeddingRow& row : table.rows) acc += row.risk;
        *out = acc / static_cast<double>(table.rows.size());
    });
}

/* ---- HazardWalk --------------------------------------------------------- */

void svhw_walk_options_init(svhw_walk_options* options) {
    if (!options) return;
    const WalkConfig defaults;
    options->iterations = defaults.iterations;
    options->mc_samples = defaults.mc_samples;
    options->step_size = defaults.step_size;
    options->decrease = 0;
    options->snapshot_every = defaults.snapshot_every;
    options->monte_carlo = 0;
    options->seed = defaults.seed;
}

svhw_status svhw_walk_run(const svhw_model* model, const svhw_dataset* dataset, size_t index,
                          const svhw_walk_options* options, svhw_walk** out) {
    if (!model) return fail_null("model");
    if (!dataset) return fail_null("dataset");
    if (!options) return fail_null("options");
    if (!out) return fail_null("out");
    return guarded([&] {
        if (index >= dataset->data.size()) {
            fail_invalid("walk index " + std::to_string(index) + " out of range for " +
                         std::to_string(dataset->data.size()) + " records");
        }
        WalkConfig wc;
        wc.iterations = options->iterations;
        wc.mc_samples = options->mc_samples;
        wc.step_size = options->step_size;
        wc.direction = options->decrease ? WalkDirection::decrease : WalkDirection::increase;
        wc.snapshot_every = options->snapshot_every;
        wc.estimator =
            options->monte_carlo ? WalkEstimator::monte_carlo : WalkEstimator::closed_form;
        wc.seed = options->seed;
        const SurvivalRecord& rec = dataset->data.records[index];
        if (dataset->data.image_rows * dataset->data.image_cols != rec.features.numel()) {
            fail_data("dataset image geometry does not match its feature width");
        }
        const std::vector<double> x(rec.features.data.begin(), rec.features.data.end());
        *out = new svhw_walk{run_walk(x, model->state, wc), dataset->data.image_rows,
                             dataset->data.image_cols};
    });
}

svhw_status svhw_walk_length(const svhw_walk* walk, size_t* out) {
    if (!walk) return fail_null("walk");
    if (!out) return fail_null("out");
    *out = walk->trajectory.records.size();
    return SVHW_OK;
}

svhw_status svhw_walk_hazard_at(const svhw_walk* walk, size_t i, double* out) {
    if (!walk) return fail_null("walk");
    if (!out) return fail_null("out");
    return guarded([&] {
        if (i >= walk->trajectory.records.size()) {
            fail_invalid("trajectory index " + std::to_string(i) + " out of range");
        }
        *out = walk->trajectory.records[i].expected_hazard;
    });
}

svhw_status svhw_walk_stationary(const svhw_walk* walk, int* out) {
    if (!walk) return fail_null("walk");
    if (!out) return fail_null("out");
    *out = walk->trajectory.status == WalkStatus::stationary ? 1 : 0;
    return SVHW_OK;
}

svhw_status svhw_walk_export(const svhw_walk* walk, const char* directory) {
    if (!walk) return fail_null("walk");
    if (!directory) return fail_null("directory");
    return guarded([&] {
        const std::string dir(directory);
        write_trajectory_csv(walk->trajectory, dir + "/trajectory.csv");
        std::vector<std::vector<double>> frames;
        char name[32];
        for (const WalkRecord& rec : walk->trajectory.records) {
            if (!rec.has_frame) continue;
            std::snprintf(name, sizeof(name), "frame_%06llu.pgm",
                          static_cast<unsigned long long>(rec.iteration));
            write_pgm(rec.frame, walk->image_rows, walk->image_cols, dir + "/" + name);
            frames.push_back(rec.frame);
        }
        emit_image_grid(frames, walk->image_rows, walk->image_cols, frames.size(),
                        dir + "/grid.pgm");
    });
}

void svhw_walk_free(svhw_walk* walk) { delete walk; }

}  // extern "C"
