#include "survwalk/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "survwalk/container.hpp"
#include "survwalk/error.hpp"
#include "survwalk/rng.hpp"

namespace survwalk {

void SurvivalDataset::validate() const {
    if (records.empty()) fail_data("dataset is empty");
    const size_t p = records[0].features.numel();
    bool any_event = false;
    for (size_t i = 0; i < records.size(); ++i) {
        const SurvivalRecord& r = records[i];
        if (r.features.numel() != p) {
            fail_data("dataset: record " + std::to_string(i) + " has " +
                      std::to_string(r.features.numel()) + " features, expected " +
                      std::to_string(p));
        }
        if (!(r.time > 0.0f)) {
            fail_data("dataset: record " + std::to_string(i) + " has non-positive time");
        }
        if (r.event != 0 && r.event != 1) {
            fail_data("dataset: record " + std::to_string(i) + " has event outside {0,1}");
        }
        for (float v : r.features.data) {
            if (!(v >= 0.0f && v <= 1.0f)) {
                fail_data("dataset: record " + std::to_string(i) + " has pixel outside [0,1]");
            }
        }
        any_event |= r.event == 1;
    }
    if (!any_event) fail_data("dataset: all observations censored");
}

Tensor<float> SurvivalDataset::feature_matrix(const std::vector<size_t>& indices) const {
    std::vector<size_t> rows = indices;
    if (rows.empty()) {
        rows.resize(records.size());
        std::iota(rows.begin(), rows.end(), size_t{0});
    }
    const size_t p = feature_dim();
    Tensor<float> out = Tensor<float>::zeros({rows.size(), p});
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= records.size()) fail_invalid("feature_matrix: index out of range");
        std::memcpy(&out.data[i * p], records[rows[i]].features.data.data(), p * sizeof(float));
    }
    return out;
}

void SurvivalDataset::save(const std::string& path) const {
    validate();
    const size_t n = records.size();

    Container c;
    c.kind = "dataset";
    Kv& info = c.meta.ensure_child("dataset");
    info.set("provenance", provenance);
    info.set_uint("seed", seed);
    info.set_uint("image_rows", image_rows);
    info.set_uint("image_cols", image_cols);

    Tensor<float> features = feature_matrix();
    Tensor<float> time = Tensor<float>::zeros({n});
    Tensor<float> event = Tensor<float>::zeros({n});
    Tensor<float> cls = Tensor<float>::zeros({n});
    for (size_t i = 0; i < n; ++i) {
        time.data[i] = records[i].time;
        event.data[i] = static_cast<float>(records[i].event);
        cls.data[i] = static_cast<float>(records[i].class_label);
    }
    c.tensors.push_back({"features", std::move(features)});
    c.tensors.push_back({"time", std::move(time)});
    c.tensors.push_back({"event", std::move(event)});
    c.tensors.push_back({"class", std::move(cls)});
    c.write(path);
}

SurvivalDataset SurvivalDataset::load(const std::string& path) {
    Container c = Container::read(path);
    if (c.kind != "dataset") {
        fail_data(path + ": container kind is '" + c.kind + "', expected 'dataset'");
    }
    const Tensor<float>& features = c.require("features");
    const Tensor<float>& time = c.require("time");
    const Tensor<float>& event = c.require("event");
    const Tensor<float>& cls = c.require("class");
    if (features.rank() != 2) fail_data(path + ": features tensor must be rank 2");
    const size_t n = features.rows();
    const size_t p = features.cols();
    if (time.numel() != n || event.numel() != n || cls.numel() != n) {
        fail_data(path + ": record array lengths disagree");
    }

    SurvivalDataset d;
    d.provenance = c.meta.get_or("dataset.provenance", "");
    d.seed = c.meta.get_uint_or("dataset.seed", 0);
    d.image_rows = c.meta.get_uint_or("dataset.image_rows", 0);
    d.image_cols = c.meta.get_uint_or("dataset.image_cols", 0);
    d.records.resize(n);
    for (size_t i = 0; i < n; ++i) {
        SurvivalRecord& r = d.records[i];
        r.features.shape = {p};
        r.features.data.assign(features.data.begin() + static_cast<std::ptrdiff_t>(i * p),
                               features.data.begin() + static_cast<std::ptrdiff_t>((i + 1) * p));
        r.time = time.data[i];
        r.event = static_cast<int>(event.data[i]);
        r.class_label = static_cast<int>(cls.data[i]);
    }
    d.validate();
    return d;
}

double censoring_rate_for(const SimulationConfig& config) {
    config.validate();
    if (config.censoring_fraction == 0.0) return 0.0;
    std::vector<double> rates(config.n_classes);
    for (uint32_t k = 0; k < config.n_classes; ++k) {
        rates[k] = config.base_rate * std::exp(config.hazard_slope * static_cast<double>(k));
    }
    // P(censored | class k) = c / (c + lambda_k); the class mean is monotone
    // increasing in c, from 0 toward 1, so bisection always brackets.
    auto censored_fraction = [&](double c) {
        double acc = 0.0;
        for (double lam : rates) acc += c / (c + lam);
        return acc / static_cast<double>(rates.size());
    };
    double lo = 0.0;
    double hi = config.base_rate;
    while (censored_fraction(hi) < config.censoring_fraction) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (censored_fraction(mid) < config.censoring_fraction) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace {

// k filled horizontal bars (base intensity 0.9) on an s x s canvas; bar i
// occupies row floor(i * s / n_classes). Per-pixel noise is added after.
void draw_glyph(Tensor<float>& img, uint32_t klass, uint32_t image_size, uint32_t n_classes) {
    for (uint32_t bar = 0; bar < klass; ++bar) {
        const size_t row = static_cast<size_t>(bar) * image_size / n_classes;
        for (uint32_t col = 0; col < image_size; ++col) {
            img.data[row * image_size + col] = 0.9f;
        }
    }
}

// min(event, censor) with the event indicator; all randomness from rng in a
// fixed order (event draw, then censor draw) so datasets replay exactly.
std::pair<float, int> draw_time(Rng& rng, double event_rate, double censor_rate) {
    const double t_event = rng.exponential(event_rate);
    double t = t_event;
    int event = 1;
    if (censor_rate > 0.0) {
        const double t_censor = rng.exponential(censor_rate);
        if (t_censor < t_event) {
            t = t_censor;
            event = 0;
        }
    }
    // keep the time > 0 invariant through f32 rounding of extreme draws
    return {std::max(static_cast<float>(t), 1e-12f), event};
}

}  // namespace

SurvivalDataset simulate(const SimulationConfig& config) {
    config.validate();
    const double censor_rate = censoring_rate_for(config);
    const uint32_t s = config.image_size;
    const size_t pixels = static_cast<size_t>(s) * s;

    SurvivalDataset d;
    d.provenance = "simulated";
    d.seed = config.seed;
    d.image_rows = s;
    d.image_cols = s;
    d.records.reserve(static_cast<size_t>(config.n_classes) * config.samples_per_class);

    Rng rng(config.seed);
    for (uint32_t k = 0; k < config.n_classes; ++k) {
        const double event_rate = config.base_rate * std::exp(config.hazard_slope * k);
        for (uint32_t sample = 0; sample < config.samples_per_class; ++sample) {
            SurvivalRecord r;
            r.class_label = static_cast<int>(k);
            auto [time, event] = draw_time(rng, event_rate, censor_rate);
            r.time = time;
            r.event = event;
            r.features = Tensor<float>::zeros({pixels});
            draw_glyph(r.features, k, s, config.n_classes);
            for (float& v : r.features.data) {
                v += static_cast<float>(rng.uniform(0.0, 0.1));
            }
            d.records.push_back(std::move(r));
        }
    }
    d.validate();
    return d;
}

namespace {

struct IdxReader {
    std::string path;
    std::string bytes;
    size_t at = 0;

    explicit IdxReader(const std::string& p) : path(p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) fail_io("cannot open: " + p);
        bytes.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }

    uint32_t read_u32_be() {
        if (at + 4 > bytes.size()) fail_data(path + ": truncated IDX header");
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + at);
        at += 4;
        return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
               (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
    }

    const unsigned char* payload(size_t n) {
        if (at + n > bytes.size()) fail_data(path + ": truncated IDX payload");
        return reinterpret_cast<const unsigned char*>(bytes.data() + at);
    }
};

}  // namespace

SurvivalDataset load_idx(const std::string& image_path, const std::string& label_path,
                         const SimulationConfig& config) {
    config.validate();

    IdxReader images(image_path);
    const uint32_t image_magic = images.read_u32_be();
    if (image_magic != 0x00000803u) {
        fail_data(image_path + ": bad IDX magic, expected 0x00000803 for images");
    }
    const uint32_t n_images = images.read_u32_be();
    const uint32_t rows = images.read_u32_be();
    const uint32_t cols = images.read_u32_be();
    const size_t pixels = static_cast<size_t>(rows) * cols;
    const unsigned char* image_bytes = images.payload(static_cast<size_t>(n_images) * pixels);

    IdxReader labels(label_path);
    const uint32_t label_magic = labels.read_u32_be();
    if (label_magic != 0x00000801u) {
        fail_data(label_path + ": bad IDX magic, expected 0x00000801 for labels");
    }
    const uint32_t n_labels = labels.read_u32_be();
    if (n_labels != n_images) {
        fail_data("IDX image count " + std::to_string(n_images) + " != label count " +
                  std::to_string(n_labels));
    }
    const unsigned char* label_bytes = labels.payload(n_labels);

    const double censor_rate = censoring_rate_for(config);
    SurvivalDataset d;
    d.provenance = "idx";
    d.seed = config.seed;
    d.image_rows = rows;
    d.image_cols = cols;
    d.records.resize(n_images);

    Rng rng(config.seed);
    for (uint32_t i = 0; i < n_images; ++i) {
        const uint32_t label = label_bytes[i];
        if (label >= config.n_classes) {
            fail_data(label_path + ": label " + std::to_string(label) + " at record " +
                      std::to_string(i) + " is outside 0.." +
                      std::to_string(config.n_classes - 1));
        }
        SurvivalRecord& r = d.records[i];
        r.class_label = static_cast<int>(label);
        r.features.shape = {pixels};
        r.features.data.resize(pixels);
        const unsigned char* px = image_bytes + static_cast<size_t>(i) * pixels;
        for (size_t j = 0; j < pixels; ++j) {
            r.features.data[j] = static_cast<float>(px[j]) / 255.0f;
        }
        const double event_rate = config.base_rate * std::exp(config.hazard_slope * label);
        auto [time, event] = draw_time(rng, event_rate, censor_rate);
        r.time = time;
        r.event = event;
    }
    d.validate();
    return d;
}

std::vector<size_t> order_for_risk_sets(const std::vector<double>& times) {
    std::vector<size_t> perm(times.size());
    std::iota(perm.begin(), perm.end(), size_t{0});
    std::stable_sort(perm.begin(), perm.end(),
                     [&](size_t a, size_t b) { return times[a] > times[b]; });
    return perm;
}

std::vector<size_t> order_for_risk_sets(const SurvivalDataset& dataset) {
    if (dataset.records.empty()) fail_invalid("order_for_risk_sets: empty dataset");
    std::vector<double> times(dataset.size());
    for (size_t i = 0; i < times.size(); ++i) times[i] = dataset.records[i].time;
    return order_for_risk_sets(times);
}

}  // namespace survwalk
