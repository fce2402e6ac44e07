#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "survwalk/adam.hpp"
#include "survwalk/config.hpp"
#include "survwalk/coxhead.hpp"
#include "survwalk/dataset.hpp"
#include "survwalk/rng.hpp"
#include "survwalk/vae.hpp"

namespace survwalk {

struct EpochLog {
    uint64_t epoch = 0;  // cumulative, 1-based after the first epoch
    double joint = 0.0;
    double elbo = 0.0;
    double cox = 0.0;
};

using LogFn = std::function<void(const EpochLog&)>;

// Everything the pipeline needs to resume bit-exactly: parameters, both
// optimizer states, the training RNG, and the epoch counter.
struct ModelState {
    RunConfig config;
    MlpParams<float> encoder;
    MlpParams<float> decoder;
    CoxParams<float> cox;
    AdamState<float> adam_vae;  // phi + theta, canonical order (enc then dec, W then b)
    AdamState<float> adam_cox;  // psi only
    Rng rng;                    // training stream
    uint64_t epoch = 0;

    size_t input_dim() const { return encoder.input_dim(); }
    size_t latent_dim() const { return config.latent_dim; }

    void save(const std::string& path) const;
    static ModelState load(const std::string& path);
};

// Fresh parameters from the config seed; training consumes a separate stream
// so initialization stays stable across epoch-count changes.
ModelState init_model(const RunConfig& config);

// Runs additional epochs of minibatch Eq. 3 optimization in place.
void train_epochs(ModelState& state, const SurvivalDataset& data, uint32_t n_epochs,
                  const LogFn& log = {});

// init + config.epochs epochs
ModelState train(const RunConfig& config, const SurvivalDataset& data, const LogFn& log = {});

// Double-precision snapshot of the parameters for the inference paths
// (embed, walk, eval); the float model stays the source of truth.
struct ModelView {
    MlpParams<double> encoder;
    MlpParams<double> decoder;
    std::vector<double> psi;
    size_t latent_dim = 0;

    LatentGaussian encode_record(const SurvivalRecord& record) const;
};

ModelView make_view(const ModelState& state);

}  // namespace survwalk
