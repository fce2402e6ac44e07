#include "survwalk/model.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "survwalk/container.hpp"
#include "survwalk/error.hpp"
#include "survwalk/graph.hpp"

namespace survwalk {

namespace {

std::vector<size_t> encoder_sizes(const RunConfig& c) {
    std::vector<size_t> sizes{static_cast<size_t>(c.image_size) * c.image_size};
    sizes.insert(sizes.end(), c.encoder_widths.begin(), c.encoder_widths.end());
    sizes.push_back(2 * static_cast<size_t>(c.latent_dim));
    return sizes;
}

std::vector<size_t> decoder_sizes(const RunConfig& c) {
    std::vector<size_t> sizes{static_cast<size_t>(c.latent_dim)};
    sizes.insert(sizes.end(), c.decoder_widths.begin(), c.decoder_widths.end());
    sizes.push_back(static_cast<size_t>(c.image_size) * c.image_size);
    return sizes;
}

// phi and theta share one Adam state; this is the canonical tensor order for
// the optimizer slots and the checkpoint moment names.
std::vector<Tensor<float>*> vae_param_ptrs(ModelState& s) {
    std::vector<Tensor<float>*> out;
    for (MlpLayer<float>& l : s.encoder.layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    for (MlpLayer<float>& l : s.decoder.layers) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    return out;
}

std::vector<const Tensor<float>*> const_views(const std::vector<Tensor<float>*>& v) {
    return {v.begin(), v.end()};
}

}  // namespace

ModelState init_model(const RunConfig& config) {
    config.validate();
    ModelState s;
    s.config = config;
    Rng init_rng(config.seed, 1);
    s.encoder = make_mlp<float>(encoder_sizes(config), init_rng);
    s.decoder = make_mlp<float>(decoder_sizes(config), init_rng);
    // psi starts random, not zero: the encoder's Cox gradient is psi-scaled,
    // and with the paper's small psi learning rate a zero head would starve
    // the representation of hazard signal for most of training.
    const size_t d = config.latent_dim;
    const double limit = std::sqrt(6.0 / static_cast<double>(d + 1));
    s.cox.psi = Tensor<float>::zeros({d});
    for (float& w : s.cox.psi.data) w = static_cast<float>(init_rng.uniform(-limit, limit));
    s.adam_vae = AdamState<float>::like(const_views(vae_param_ptrs(s)));
    s.adam_cox = AdamState<float>::like({&s.cox.psi});
    s.rng = Rng(config.seed, 2);
    s.epoch = 0;
    return s;
}

namespace {

struct BatchStats {
    double joint = 0.0;
    double elbo = 0.0;
    double cox = 0.0;
};

BatchStats batch_step(ModelState& s, const SurvivalDataset& data,
                      const std::vector<size_t>& idx, const LossWeights& weights) {
    const size_t m = idx.size();
    const size_t d = s.latent_dim();

    Graph<float> g;
    MlpNodeIds<float> enc_ids = mlp_into_graph(g, s.encoder);
    MlpNodeIds<float> dec_ids = mlp_into_graph(g, s.decoder);
    Tensor<float> psi_col = s.cox.psi;
    psi_col.shape = {d, 1};
    const int psi_node = g.param(std::move(psi_col));

    const int x = g.constant(data.feature_matrix(idx));
    auto [mu, log_var] = encode_graph(g, x, enc_ids, d);

    Tensor<float> eps = Tensor<float>::zeros({m, d});
    for (float& e : eps.data) e = static_cast<float>(s.rng.normal());
    const int z = reparameterize_graph(g, mu, log_var, g.constant(std::move(eps)));
    const int xhat = mlp_forward_graph(g, z, dec_ids, true);
    const int elbo = elbo_graph(g, x, xhat, mu, log_var, static_cast<float>(weights.beta));

    std::vector<double> times(m);
    std::vector<int> events(m);
    for (size_t i = 0; i < m; ++i) {
        times[i] = data.records[idx[i]].time;
        events[i] = data.records[idx[i]].event;
    }
    const int risks = risk_graph(g, z, psi_node);
    const int cox = cox_loss_graph(g, risks, times, events);
    const int loss = joint_graph(g, elbo, cox, weights);
    g.backward(loss);

    std::vector<Tensor<float>*> params = vae_param_ptrs(s);
    std::vector<const Tensor<float>*> grads;
    for (const auto& [w_id, b_id] : enc_ids.layers) {
        grads.push_back(&g.grad(w_id));
        grads.push_back(&g.grad(b_id));
    }
    for (const auto& [w_id, b_id] : dec_ids.layers) {
        grads.push_back(&g.grad(w_id));
        grads.push_back(&g.grad(b_id));
    }
    adam_step(s.adam_vae, params, grads, static_cast<float>(s.config.lr_vae));

    Tensor<float> psi_grad = g.grad(psi_node);
    psi_grad.shape = {d};
    adam_step(s.adam_cox, {&s.cox.psi}, {&psi_grad}, static_cast<float>(s.config.lr_cox));

    BatchStats stats;
    stats.joint = g.value(loss).data[0];
    stats.cox = g.value(cox).data[0];
    double acc = 0.0;
    for (float v : g.value(elbo).data) acc += v;
    stats.elbo = acc / static_cast<double>(m);
    return stats;
}

std::vector<std::vector<size_t>> make_batches(ModelState& s, const SurvivalDataset& data) {
    const size_t n = data.size();
    const size_t bs = std::min<size_t>(s.config.batch_size, n);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    // Every batch must carry an event or Eq. 2 is undefined on it; reshuffle
    // the epoch until the split works out (instant in any realistic dataset).
    for (int attempt = 0; attempt < 100; ++attempt) {
        s.rng.shuffle(order);
        std::vector<std::vector<size_t>> batches;
        bool ok = true;
        for (size_t at = 0; at < n; at += bs) {
            const size_t hi = std::min(n, at + bs);
            std::vector<size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(at),
                                      order.begin() + static_cast<std::ptrdiff_t>(hi));
            bool has_event = false;
            for (size_t i : batch) has_event |= data.records[i].event == 1;
            if (!has_event) {
                ok = false;
                break;
            }
            batches.push_back(std::move(batch));
        }
        if (ok) return batches;
    }
    fail_data("training: could not form minibatches that all contain an event");
}

}  // namespace

void train_epochs(ModelState& s, const SurvivalDataset& data, uint32_t n_epochs,
                  const LogFn& log) {
    s.config.validate();
    data.validate();
    if (data.feature_dim() != s.input_dim()) {
        fail_invalid("training: dataset has " + std::to_string(data.feature_dim()) +
                     " features, model expects " + std::to_string(s.input_dim()));
    }
    const LossWeights weights{s.config.tau, s.config.beta};
    weights.validate();

    for (uint32_t e = 0; e < n_epochs; ++e) {
        const std::vector<std::vector<size_t>> batches = make_batches(s, data);
        BatchStats sums;
        for (const std::vector<size_t>& batch : batches) {
            const BatchStats b = batch_step(s, data, batch, weights);
            sums.joint += b.joint;
            sums.elbo += b.elbo;
            sums.cox += b.cox;
        }
        const double k = static_cast<double>(batches.size());
        s.epoch += 1;
        if (log) log({s.epoch, sums.joint / k, sums.elbo / k, sums.cox / k});
    }
}

ModelState train(const RunConfig& config, const SurvivalDataset& data, const LogFn& log) {
    ModelState s = init_model(config);
    train_epochs(s, data, config.epochs, log);
    return s;
}

// ---------------------------------------------------------------------------
// Checkpoint persistence

void ModelState::save(const std::string& path) const {
    Container c;
    c.kind = "checkpoint";
    c.meta.ensure_child("config") = config.to_kv();
    Kv& t = c.meta.ensure_child("train");
    t.set_uint("epoch", epoch);
    t.set_uint("adam_vae_step", adam_vae.step);
    t.set_uint("adam_cox_step", adam_cox.step);
    const std::array<uint64_t, 4> words = rng.state();
    std::string rng_text;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) rng_text += ",";
        rng_text += std::to_string(words[i]);
    }
    t.set("rng", rng_text);

    auto push = [&c](const std::string& name, const Tensor<float>& tensor) {
        c.tensors.push_back({name, tensor});
    };
    for (size_t i = 0; i < encoder.layers.size(); ++i) {
        push("enc_w" + std::to_string(i), encoder.layers[i].weight);
        push("enc_b" + std::to_string(i), encoder.layers[i].bias);
    }
    for (size_t i = 0; i < decoder.layers.size(); ++i) {
        push("dec_w" + std::to_string(i), decoder.layers[i].weight);
        push("dec_b" + std::to_string(i), decoder.layers[i].bias);
    }
    push("psi", cox.psi);
    for (size_t i = 0; i < adam_vae.m.size(); ++i) {
        push("avae_m" + std::to_string(i), adam_vae.m[i]);
        push("avae_v" + std::to_string(i), adam_vae.v[i]);
    }
    push("acox_m0", adam_cox.m[0]);
    push("acox_v0", adam_cox.v[0]);
    c.write(path);
}

ModelState ModelState::load(const std::string& path) {
    Container c = Container::read(path);
    if (c.kind != "checkpoint") {
        fail_data(path + ": container kind is '" + c.kind + "', expected 'checkpoint'");
    }
    const Kv* config_kv = c.meta.child("config");
    if (!config_kv) fail_data(path + ": checkpoint is missing its config echo");

    ModelState s;
    s.config = RunConfig::from_kv(*config_kv);
    s.config.validate();
    s.epoch = c.meta.get_uint_or("train.epoch", 0);

    auto read_mlp = [&](const std::string& prefix, const std::vector<size_t>& sizes) {
        MlpParams<float> p;
        for (size_t i = 0; i + 1 < sizes.size(); ++i) {
            MlpLayer<float> l;
            l.weight = c.require(prefix + "_w" + std::to_string(i));
            l.bias = c.require(prefix + "_b" + std::to_string(i));
            if (l.weight.rank() != 2 || l.weight.rows() != sizes[i] ||
                l.weight.cols() != sizes[i + 1] || l.bias.numel() != sizes[i + 1]) {
                fail_data(path + ": tensor " + prefix + "_w" + std::to_string(i) +
                          " does not match the config architecture");
            }
            p.layers.push_back(std::move(l));
        }
        return p;
    };
    s.encoder = read_mlp("enc", encoder_sizes(s.config));
    s.decoder = read_mlp("dec", decoder_sizes(s.config));
    s.cox.psi = c.require("psi");
    s.cox.check_dim(s.config.latent_dim);

    const size_t n_vae = 2 * (s.encoder.layers.size() + s.decoder.layers.size());
    s.adam_vae.step = c.meta.get_uint_or("train.adam_vae_step", 0);
    for (size_t i = 0; i < n_vae; ++i) {
        s.adam_vae.m.push_back(c.require("avae_m" + std::to_string(i)));
        s.adam_vae.v.push_back(c.require("avae_v" + std::to_string(i)));
    }
    s.adam_cox.step = c.meta.get_uint_or("train.adam_cox_step", 0);
    s.adam_cox.m.push_back(c.require("acox_m0"));
    s.adam_cox.v.push_back(c.require("acox_v0"));

    const std::string rng_text = c.meta.get_or("train.rng", "");
    std::array<uint64_t, 4> words{};
    size_t at = 0;
    for (size_t i = 0; i < 4; ++i) {
        const size_t comma = rng_text.find(',', at);
        const std::string word =
            rng_text.substr(at, comma == std::string::npos ? std::string::npos : comma - at);
        if (word.empty()) fail_data(path + ": malformed rng state in checkpoint");
        words[i] = std::strtoull(word.c_str(), nullptr, 10);
        at = comma == std::string::npos ? rng_text.size() : comma + 1;
    }
    s.rng.set_state(words);
    return s;
}

// ---------------------------------------------------------------------------
// Inference view

ModelView make_view(const ModelState& s) {
    ModelView v;
    v.encoder = s.encoder.cast<double>();
    v.decoder = s.decoder.cast<double>();
    v.psi.assign(s.cox.psi.data.begin(), s.cox.psi.data.end());
    v.latent_dim = s.latent_dim();
    return v;
}

LatentGaussian ModelView::encode_record(const SurvivalRecord& record) const {
    std::vector<double> x(record.features.data.begin(), record.features.data.end());
    return encode(x, encoder);
}

}  // namespace survwalk
