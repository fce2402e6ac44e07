// svhw: simulate -> train -> embed -> walk -> eval pipeline over the C API.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "svhw.h"

namespace {

constexpr int kUsageError = 1;

// not-ok statuses map onto the documented exit codes: 1 usage, 2 data
int exit_code_of(svhw_status s) {
    if (s == SVHW_OK) return 0;
    return s == SVHW_ERR_INVALID ? 1 : 2;
}

int check(svhw_status s) {
    if (s != SVHW_OK) std::fprintf(stderr, "error: %s\n", svhw_last_error());
    return exit_code_of(s);
}

using ConfigPtr = std::unique_ptr<svhw_config, decltype(&svhw_config_free)>;
using DatasetPtr = std::unique_ptr<svhw_dataset, decltype(&svhw_dataset_free)>;
using ModelPtr = std::unique_ptr<svhw_model, decltype(&svhw_model_free)>;
using WalkPtr = std::unique_ptr<svhw_walk, decltype(&svhw_walk_free)>;

int load_config(const std::string& path, const std::vector<std::string>& sets, ConfigPtr& out) {
    svhw_config* raw = nullptr;
    if (int rc = check(svhw_config_read(path.c_str(), &raw))) return rc;
    out.reset(raw);
    for (const std::string& kv : sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return kUsageError;
        }
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        if (int rc = check(svhw_config_set(out.get(), key.c_str(), value.c_str()))) return rc;
    }
    return 0;
}

int load_dataset(const std::string& dir, DatasetPtr& out) {
    const std::string path = dir + "/dataset.svhw";
    svhw_dataset* raw = nullptr;
    if (int rc = check(svhw_dataset_read(path.c_str(), &raw))) return rc;
    out.reset(raw);
    return 0;
}

int load_model(const std::string& path, ModelPtr& out) {
    svhw_model* raw = nullptr;
    if (int rc = check(svhw_model_read(path.c_str(), &raw))) return rc;
    out.reset(raw);
    return 0;
}

int ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        std::fprintf(stderr, "error: cannot create directory %s: %s\n", dir.c_str(),
                     ec.message().c_str());
        return 2;
    }
    return 0;
}

extern "C" void print_epoch(unsigned long long epoch, double joint, double elbo, double cox,
                            void*) {
    std::fprintf(stderr, "epoch %llu  joint %.6f  elbo %.6f  cox %.6f\n", epoch, joint, elbo,
                 cox);
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& sets,
                 const std::string& out_dir) {
    ConfigPtr config(nullptr, svhw_config_free);
    if (int rc = load_config(config_path, sets, config)) return rc;
    svhw_dataset* raw = nullptr;
    if (int rc = check(svhw_simulate(config.get(), &raw))) return rc;
    DatasetPtr data(raw, svhw_dataset_free);
    if (int rc = ensure_dir(out_dir)) return rc;
    const std::string path = out_dir + "/dataset.svhw";
    if (int rc = check(svhw_dataset_write(data.get(), path.c_str()))) return rc;
    size_t n = 0;
    svhw_dataset_size(data.get(), &n);
    std::printf("wrote %s (%zu records)\n", path.c_str(), n);
    return 0;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& data_dir, const std::string& out_path) {
    ConfigPtr config(nullptr, svhw_config_free);
    if (int rc = load_config(config_path, sets, config)) return rc;
    DatasetPtr data(nullptr, svhw_dataset_free);
    if (int rc = load_dataset(data_dir, data)) return rc;
    svhw_model* raw = nullptr;
    if (int rc = check(svhw_train(config.get(), data.get(), print_epoch, nullptr, &raw))) {
        return rc;
    }
    ModelPtr model(raw, svhw_model_free);
    if (int rc = check(svhw_model_write(model.get(), out_path.c_str()))) return rc;
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
}

int cmd_embed(const std::string& ckpt, const std::string& data_dir, const std::string& out_csv) {
    ModelPtr model(nullptr, svhw_model_free);
    if (int rc = load_model(ckpt, model)) return rc;
    DatasetPtr data(nullptr, svhw_dataset_free);
    if (int rc = load_dataset(data_dir, data)) return rc;
    if (int rc = check(svhw_embed_csv(model.get(), data.get(), out_csv.c_str()))) return rc;
    std::printf("wrote %s\n", out_csv.c_str());
    return 0;
}

struct WalkResult {
    svhw_status status = SVHW_OK;
    std::string error;
    std::string dir;
    size_t length = 0;
    int stationary = 0;
    double first = 0.0;
    double last = 0.0;
};

WalkResult run_one_walk(const svhw_model* model, const svhw_dataset* data, size_t index,
                        svhw_walk_options options, const std::string& dir) {
    WalkResult result;
    result.dir = dir;
    options.seed += index;  // independent MC draws per walk
    svhw_walk* raw = nullptr;
    result.status = svhw_walk_run(model, data, index, &options, &raw);
    if (result.status != SVHW_OK) {
        result.error = svhw_last_error();
        return result;
    }
    WalkPtr walk(raw, svhw_walk_free);
    result.status = svhw_walk_export(walk.get(), dir.c_str());
    if (result.status != SVHW_OK) {
        result.error = svhw_last_error();
        return result;
    }
    svhw_walk_length(walk.get(), &result.length);
    svhw_walk_stationary(walk.get(), &result.stationary);
    svhw_walk_hazard_at(walk.get(), 0, &result.first);
    svhw_walk_hazard_at(walk.get(), result.length - 1, &result.last);
    return result;
}

int cmd_walk(const std::string& ckpt, const std::string& data_dir,
             const std::vector<size_t>& indices, const svhw_walk_options& options,
             const std::string& out_dir) {
    ModelPtr model(nullptr, svhw_model_free);
    if (int rc = load_model(ckpt, model)) return rc;
    DatasetPtr data(nullptr, svhw_dataset_free);
    if (int rc = load_dataset(data_dir, data)) return rc;

    std::vector<std::string> dirs;
    for (size_t index : indices) {
        std::string dir = out_dir;
        if (indices.size() > 1) dir += "/walk_" + std::to_string(index);
        if (int rc = ensure_dir(dir)) return rc;
        dirs.push_back(dir);
    }

    // walks are independent and the model is read-only, so fan out
    std::vector<WalkResult> results(indices.size());
    if (indices.size() == 1) {
        results[0] = run_one_walk(model.get(), data.get(), indices[0], options, dirs[0]);
    } else {
        std::vector<std::thread> pool;
        for (size_t i = 0; i < indices.size(); ++i) {
            pool.emplace_back([&, i] {
                results[i] = run_one_walk(model.get(), data.get(), indices[i], options, dirs[i]);
            });
        }
        for (std::thread& t : pool) t.join();
    }

    double mean_risk = 0.0;
    if (int rc = check(svhw_mean_risk(model.get(), data.get(), &mean_risk))) return rc;
    // report hazards both raw and centered on the cohort: exp(r) is only
    // identified up to the cohort's mean risk in a Cox model
    const double centering = std::exp(-mean_risk);

    int exit_rc = 0;
    for (size_t i = 0; i < indices.size(); ++i) {
        const WalkResult& r = results[i];
        if (r.status != SVHW_OK) {
            std::fprintf(stderr, "error: walk %zu: %s\n", indices[i], r.error.c_str());
            exit_rc = std::max(exit_rc, exit_code_of(r.status));
            continue;
        }
        std::printf("index = %zu\n", indices[i]);
        std::printf("status = %s\n", r.stationary ? "stationary" : "completed");
        std::printf("records = %zu\n", r.length);
        std::printf("initial_hazard = %.10g\n", r.first);
        std::printf("final_hazard = %.10g\n", r.last);
        std::printf("hazard_ratio = %.10g\n", r.last / r.first);
        std::printf("initial_hazard_centered = %.10g\n", r.first * centering);
        std::printf("final_hazard_centered = %.10g\n", r.last * centering);
        std::printf("wrote %s\n", (r.dir + "/trajectory.csv").c_str());
        std::printf("wrote %s\n", (r.dir + "/grid.pgm").c_str());
    }
    return exit_rc;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir) {
    ModelPtr model(nullptr, svhw_model_free);
    if (int rc = load_model(ckpt, model)) return rc;
    DatasetPtr data(nullptr, svhw_dataset_free);
    if (int rc = load_dataset(data_dir, data)) return rc;
    svhw_eval_report report{};
    if (int rc = check(svhw_evaluate(model.get(), data.get(), &report))) return rc;
    std::printf("c_index = %.10g\n", report.c_index);
    std::printf("hazard_rank_agreement = %.10g\n", report.hazard_rank_agreement);
    std::printf("mean_reconstruction_nll = %.10g\n", report.mean_reconstruction_nll);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"survival VAE + HazardWalk pipeline"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_path, ckpt_path;
    std::vector<std::string> sets;

    auto* sim = app.add_subcommand("simulate", "generate a synthetic survival dataset");
    sim->add_option("--config", config_path, "config file")->required();
    sim->add_option("--set", sets, "override a config key (key=value)");
    sim->add_option("--out", out_path, "output directory")->required();

    auto* train = app.add_subcommand("train", "train the model on a dataset directory");
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--set", sets, "override a config key (key=value)");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--out", ckpt_path, "checkpoint path to write")->required();

    auto* embed = app.add_subcommand("embed", "write per-record embeddings as CSV");
    embed->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    embed->add_option("--data", data_dir, "dataset directory")->required();
    embed->add_option("--out", out_path, "CSV path to write")->required();

    svhw_walk_options options;
    svhw_walk_options_init(&options);
    std::vector<size_t> walk_indices;
    std::string direction = "increase";
    std::string estimator = "closed_form";
    auto* walk = app.add_subcommand("walk", "run a HazardWalk from one or more records");
    walk->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    walk->add_option("--data", data_dir, "dataset directory")->required();
    walk->add_option("--index", walk_indices, "record index to start from (repeatable)")
        ->required();
    walk->add_option("--direction", direction, "increase|decrease")
        ->check(CLI::IsMember({"increase", "decrease"}));
    walk->add_option("--iters", options.iterations, "walk iterations");
    walk->add_option("--samples", options.mc_samples, "Monte-Carlo samples per step");
    walk->add_option("--step", options.step_size, "step size eta");
    walk->add_option("--snapshot-every", options.snapshot_every, "frame cadence");
    walk->add_option("--estimator", estimator, "closed_form|monte_carlo")
        ->check(CLI::IsMember({"closed_form", "monte_carlo"}));
    walk->add_option("--seed", options.seed, "walk RNG seed");
    walk->add_option("--out", out_path, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "print C-index, rank agreement, reconstruction NLL");
    eval->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsageError;
    }

    if (sim->parsed()) return cmd_simulate(config_path, sets, out_path);
    if (train->parsed()) return cmd_train(config_path, sets, data_dir, ckpt_path);
    if (embed->parsed()) return cmd_embed(ckpt_path, data_dir, out_path);
    if (walk->parsed()) {
        options.decrease = direction == "decrease" ? 1 : 0;
        options.monte_carlo = estimator == "monte_carlo" ? 1 : 0;
        return cmd_walk(ckpt_path, data_dir, walk_indices, options, out_path);
    }
    if (eval->parsed()) return cmd_eval(ckpt_path, data_dir);
    return kUsageError;
}
