#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "survwalk/container.hpp"
#include "survwalk/error.hpp"
#include "survwalk/model.hpp"
#include "survwalk/rng.hpp"
#include "survwalk/vae.hpp"

using namespace survwalk;

namespace {

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.latent_dim = 3;
    cfg.image_size = 4;
    cfg.encoder_widths = {8};
    cfg.decoder_widths = {8};
    cfg.batch_size = 16;
    cfg.epochs = 5;
    cfg.seed = 11;
    cfg.lr_vae = 1e-3;  // tiny runs need to move in a handful of steps
    cfg.lr_cox = 1e-4;
    return cfg;
}

SurvivalDataset tiny_dataset(uint32_t per_class = 8, uint64_t seed = 29) {
    SimulationConfig sim;
    sim.n_classes = 4;
    sim.samples_per_class = per_class;
    sim.image_size = 4;
    sim.censoring_fraction = 0.2;
    sim.seed = seed;
    return simulate(sim);
}

bool same_tensor(const Tensor<float>& a, const Tensor<float>& b) {
    return a.shape == b.shape && a.data == b.data;
}

bool same_mlp(const MlpParams<float>& a, const MlpParams<float>& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (size_t i = 0; i < a.layers.size(); ++i) {
        if (!same_tensor(a.layers[i].weight, b.layers[i].weight)) return false;
        if (!same_tensor(a.layers[i].bias, b.layers[i].bias)) return false;
    }
    return true;
}

bool same_state(const ModelState& a, const ModelState& b) {
    if (!same_mlp(a.encoder, b.encoder) || !same_mlp(a.decoder, b.decoder)) return false;
    if (!same_tensor(a.cox.psi, b.cox.psi)) return false;
    if (a.adam_vae.step != b.adam_vae.step || a.adam_cox.step != b.adam_cox.step) return false;
    if (a.adam_vae.m.size() != b.adam_vae.m.size()) return false;
    for (size_t i = 0; i < a.adam_vae.m.size(); ++i) {
        if (!same_tensor(a.adam_vae.m[i], b.adam_vae.m[i])) return false;
        if (!same_tensor(a.adam_vae.v[i], b.adam_vae.v[i])) return false;
    }
    if (!same_tensor(a.adam_cox.m[0], b.adam_cox.m[0])) return false;
    if (!same_tensor(a.adam_cox.v[0], b.adam_cox.v[0])) return false;
    return a.rng.state() == b.rng.state() && a.epoch == b.epoch;
}

// deterministic reconstruction loss: decode the posterior mean, no sampling
double round_trip_nll(const ModelState& s, const SurvivalDataset& data) {
    const ModelView view = make_view(s);
    double acc = 0.0;
    for (const SurvivalRecord& rec : data.records) {
        const std::vector<double> x(rec.features.data.begin(), rec.features.data.end());
        acc += bernoulli_nll(x, decode(encode(x, view.encoder).mu, view.decoder));
    }
    return acc / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("init_model: architecture follows the config") {
    const RunConfig cfg = tiny_config();
    const ModelState s = init_model(cfg);

    REQUIRE(s.encoder.layers.size() == 2);  // 16 -> 8 -> 6
    CHECK(s.encoder.layers[0].weight.rows() == 16);
    CHECK(s.encoder.layers[0].weight.cols() == 8);
    CHECK(s.encoder.layers[1].weight.cols() == 2 * cfg.latent_dim);
    REQUIRE(s.decoder.layers.size() == 2);  // 3 -> 8 -> 16
    CHECK(s.decoder.layers[0].weight.rows() == cfg.latent_dim);
    CHECK(s.decoder.layers[1].weight.cols() == 16);
    CHECK(s.input_dim() == 16);
    CHECK(s.latent_dim() == cfg.latent_dim);
    CHECK(s.epoch == 0);

    // biases start at zero, weights do not
    for (float b : s.encoder.layers[0].bias.data) CHECK(b == 0.0f);
    bool any = false;
    for (float w : s.encoder.layers[0].weight.data) any = any || w != 0.0f;
    CHECK(any);

    // psi is a random nonzero head inside the Glorot limit
    REQUIRE(s.cox.psi.numel() == cfg.latent_dim);
    const double limit = std::sqrt(6.0 / (cfg.latent_dim + 1.0));
    bool psi_nonzero = false;
    for (float w : s.cox.psi.data) {
        psi_nonzero = psi_nonzero || w != 0.0f;
        CHECK(std::abs(w) <= limit);
    }
    CHECK(psi_nonzero);

    // optimizer slots mirror the parameter shapes, zero-filled
    REQUIRE(s.adam_vae.m.size() == 8);  // (2 enc + 2 dec) layers x (W, b)
    CHECK(s.adam_vae.step == 0);
    CHECK(s.adam_vae.m[0].shape == s.encoder.layers[0].weight.shape);
    for (float v : s.adam_vae.v[0].data) CHECK(v == 0.0f);
    REQUIRE(s.adam_cox.m.size() == 1);
    CHECK(s.adam_cox.m[0].shape == s.cox.psi.shape);

    // training consumes its own stream, separate from initialization
    CHECK(s.rng.state() == Rng(cfg.seed, 2).state());
}

TEST_CASE("init_model: deterministic in the seed") {
    const RunConfig cfg = tiny_config();
    CHECK(same_state(init_model(cfg), init_model(cfg)));

    RunConfig other = cfg;
    other.seed = 12;
    CHECK_FALSE(same_tensor(init_model(cfg).encoder.layers[0].weight,
                            init_model(other).encoder.layers[0].weight));
}

TEST_CASE("init_model: invalid configs are rejected") {
    RunConfig cfg = tiny_config();
    cfg.latent_dim = 0;
    CHECK_THROWS_AS(init_model(cfg), Error);
}

TEST_CASE("train_epochs: loss drops and epoch logs are cumulative") {
    const SurvivalDataset data = tiny_dataset();
    ModelState s = init_model(tiny_config());

    std::vector<EpochLog> logs;
    train_epochs(s, data, 20, [&](const EpochLog& l) { logs.push_back(l); });
    REQUIRE(logs.size() == 20);
    for (size_t i = 0; i < logs.size(); ++i) {
        CHECK(logs[i].epoch == i + 1);
        CHECK(std::isfinite(logs[i].joint));
        CHECK(std::isfinite(logs[i].elbo));
        CHECK(std::isfinite(logs[i].cox));
    }
    // epoch means wobble with the batch split, so compare ends of the run
    auto mean3 = [&](size_t start) {
        return (logs[start].joint + logs[start + 1].joint + logs[start + 2].joint) / 3.0;
    };
    CHECK(mean3(logs.size() - 3) < mean3(0));
    CHECK(s.epoch == 20);

    // a second call keeps counting from where the first stopped
    train_epochs(s, data, 2, [&](const EpochLog& l) { logs.push_back(l); });
    REQUIRE(logs.size() == 22);
    CHECK(logs[20].epoch == 21);
    CHECK(logs[21].epoch == 22);
}

TEST_CASE("train_epochs: zero epochs is a no-op") {
    const SurvivalDataset data = tiny_dataset();
    ModelState s = init_model(tiny_config());
    const ModelState before = s;
    train_epochs(s, data, 0);
    CHECK(same_state(s, before));
}

TEST_CASE("train_epochs: rejects mismatched features and event-free batches") {
    ModelState s = init_model(tiny_config());

    SUBCASE("feature width") {
        SimulationConfig sim;
        sim.n_classes = 2;
        sim.samples_per_class = 4;
        sim.image_size = 8;  // 64 features, model expects 16
        const SurvivalDataset wide = simulate(sim);
        CHECK_THROWS_AS(train_epochs(s, wide, 1), Error);
    }
    SUBCASE("a lone event cannot cover two batches") {
        SurvivalDataset data = tiny_dataset();
        data.records.resize(4);
        for (size_t i = 0; i < 4; ++i) {
            data.records[i].event = i == 0 ? 1 : 0;
            data.records[i].time = 1.0 + static_cast<double>(i);
        }
        ModelState small = init_model(tiny_config());
        small.config.batch_size = 2;
        try {
            train_epochs(small, data, 1);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::data_format);
            CHECK(std::string(e.what()) ==
                  "training: could not form minibatches that all contain an event");
        }
    }
}

TEST_CASE("train is exactly init_model plus config.epochs of train_epochs") {
    const SurvivalDataset data = tiny_dataset();
    RunConfig cfg = tiny_config();
    cfg.epochs = 4;

    const ModelState a = train(cfg, data);
    ModelState b = init_model(cfg);
    train_epochs(b, data, 4);
    CHECK(same_state(a, b));
    CHECK(a.epoch == 4);
    // one batch run per epoch at this size: 32 records / 16 = 2 batches
    CHECK(a.adam_vae.step == 8);
    CHECK(a.adam_cox.step == 8);
}

TEST_CASE("round-trip reconstruction loss strictly decreases over the first 100 steps") {
    // fixed 100-sample batch: batch_size covers the whole dataset, so each
    // epoch is exactly one optimizer step
    SimulationConfig sim;
    sim.n_classes = 4;
    sim.samples_per_class = 25;
    sim.image_size = 4;
    sim.censoring_fraction = 0.2;
    sim.seed = 3;
    const SurvivalDataset data = simulate(sim);
    REQUIRE(data.size() == 100);

    RunConfig cfg = tiny_config();
    cfg.batch_size = 100;
    ModelState s = init_model(cfg);

    double prev = round_trip_nll(s, data);
    for (int step = 0; step < 100; ++step) {
        train_epochs(s, data, 1);
        const double now = round_trip_nll(s, data);
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("checkpoint: save/load round-trips every moving part bitwise") {
    testutil::TempDir dir("ckpt_rt");
    const SurvivalDataset data = tiny_dataset();
    ModelState s = init_model(tiny_config());
    train_epochs(s, data, 3);

    const std::string path = dir.file("model.svhw");
    s.save(path);
    const ModelState r = ModelState::load(path);
    CHECK(same_state(s, r));
    CHECK(r.epoch == 3);
    CHECK(r.config.latent_dim == s.config.latent_dim);
    CHECK(r.config.seed == s.config.seed);
    CHECK(r.config.encoder_widths == s.config.encoder_widths);

    // saving the loaded state reproduces the file byte for byte
    const std::string again = dir.file("model2.svhw");
    r.save(again);
    CHECK(testutil::slurp(again) == testutil::slurp(path));
}

TEST_CASE("checkpoint: resumed training matches uninterrupted training bitwise") {
    testutil::TempDir dir("ckpt_resume");
    const SurvivalDataset data = tiny_dataset();
    const RunConfig cfg = tiny_config();

    ModelState full = init_model(cfg);
    train_epochs(full, data, 6);

    ModelState half = init_model(cfg);
    train_epochs(half, data, 3);
    const std::string path = dir.file("half.svhw");
    half.save(path);
    ModelState resumed = ModelState::load(path);
    train_epochs(resumed, data, 3);

    CHECK(same_state(full, resumed));
}

TEST_CASE("checkpoint: malformed files are rejected with precise messages") {
    testutil::TempDir dir("ckpt_bad");
    const RunConfig cfg = tiny_config();
    ModelState s = init_model(cfg);
    const std::string good = dir.file("good.svhw");
    s.save(good);

    SUBCASE("wrong container kind") {
        Container c = Container::read(good);
        c.kind = "dataset";
        const std::string path = dir.file("kind.svhw");
        c.write(path);
        try {
            ModelState::load(path);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("expected 'checkpoint'") != std::string::npos);
        }
    }
    SUBCASE("missing config echo") {
        Container c;
        c.kind = "checkpoint";
        const std::string path = dir.file("noconfig.svhw");
        c.write(path);
        try {
            ModelState::load(path);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("missing its config echo") != std::string::npos);
        }
    }
    SUBCASE("missing tensor") {
        Container c = Container::read(good);
        c.tensors.erase(std::remove_if(c.tensors.begin(), c.tensors.end(),
                                       [](const auto& t) { return t.name == "psi"; }),
                        c.tensors.end());
        const std::string path = dir.file("nopsi.svhw");
        c.write(path);
        try {
            ModelState::load(path);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("missing tensor 'psi'") != std::string::npos);
        }
    }
    SUBCASE("config echo that contradicts the stored tensors") {
        Container c = Container::read(good);
        c.meta.ensure_child("config").set_uint("latent_dim", 4);
        const std::string path = dir.file("arch.svhw");
        c.write(path);
        try {
            ModelState::load(path);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("does not match the config architecture") !=
                  std::string::npos);
        }
    }
    SUBCASE("malformed rng state") {
        Container c = Container::read(good);
        c.meta.ensure_child("train").set("rng", "1,2");
        const std::string path = dir.file("rng.svhw");
        c.write(path);
        try {
            ModelState::load(path);
            FAIL("expected throw");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("malformed rng state") != std::string::npos);
        }
    }
}

TEST_CASE("ModelView: a faithful double-precision snapshot") {
    const SurvivalDataset data = tiny_dataset();
    ModelState s = init_model(tiny_config());
    train_epochs(s, data, 2);

    const ModelView view = make_view(s);
    CHECK(view.latent_dim == s.latent_dim());
    REQUIRE(view.psi.size() == s.cox.psi.numel());
    for (size_t i = 0; i < view.psi.size(); ++i) {
        CHECK(view.psi[i] == static_cast<double>(s.cox.psi.data[i]));
    }
    REQUIRE(view.encoder.layers.size() == s.encoder.layers.size());
    for (size_t l = 0; l < view.encoder.layers.size(); ++l) {
        const auto& vw = view.encoder.layers[l].weight;
        const auto& sw = s.encoder.layers[l].weight;
        REQUIRE(vw.shape == sw.shape);
        for (size_t i = 0; i < vw.numel(); ++i) {
            CHECK(vw.data[i] == static_cast<double>(sw.data[i]));
        }
    }

    // encode_record agrees with encoding the features by hand
    const SurvivalRecord& rec = data.records[5];
    const std::vector<double> x(rec.features.data.begin(), rec.features.data.end());
    const LatentGaussian direct = encode(x, view.encoder);
    const LatentGaussian via = view.encode_record(rec);
    CHECK(via.mu == direct.mu);
    CHECK(via.log_var == direct.log_var);
}
