#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace survwalk {

// Ordered key-value tree with `block { ... }` nesting. Serialization is
// canonical (insertion order, shortest round-trip float formatting) so that
// emitted text survives parse -> serialize byte for byte.
class Kv {
public:
    static Kv parse(const std::string& text);
    std::string serialize() const;

    bool has(const std::string& path) const;
    const std::string& get(const std::string& path) const;
    std::string get_or(const std::string& path, const std::string& fallback) const;

    void set(const std::string& path, const std::string& value);
    void set_int(const std::string& path, int64_t value);
    void set_uint(const std::string& path, uint64_t value);
    void set_double(const std::string& path, double value);

    int64_t get_int(const std::string& path) const;
    uint64_t get_uint(const std::string& path) const;
    double get_double(const std::string& path) const;

    int64_t get_int_or(const std::string& path, int64_t fallback) const;
    uint64_t get_uint_or(const std::string& path, uint64_t fallback) const;
    double get_double_or(const std::string& path, double fallback) const;

    const Kv* child(const std::string& name) const;
    Kv& ensure_child(const std::string& name);

    const std::vector<std::pair<std::string, std::string>>& values() const { return values_; }
    const std::vector<std::pair<std::string, Kv>>& children() const { return children_; }

    bool empty() const { return values_.empty() && children_.empty(); }

private:
    void serialize_into(std::string& out, int depth) const;
    const std::string* find(const std::string& path) const;

    std::vector<std::pair<std::string, std::string>> values_;
    std::vector<std::pair<std::string, Kv>> children_;
};

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);
std::string format_size_list(const std::vector<size_t>& v);
std::vector<size_t> parse_size_list(const std::string& s);

struct SimulationConfig {
    uint32_t n_classes = 10;
    uint32_t samples_per_class = 200;
    uint32_t image_size = 16;
    double base_rate = 0.001;
    double hazard_slope = 1.0;
    double censoring_fraction = 0.2;
    uint64_t seed = 42;

    void validate() const;
};

struct RunConfig {
    uint32_t latent_dim = 4;
    double beta = 1.0;
    double tau = 0.5;
    double lr_vae = 1e-4;
    double lr_cox = 1e-5;
    uint32_t epochs = 40;
    uint32_t batch_size = 256;
    uint64_t seed = 42;
    uint32_t image_size = 16;
    std::vector<size_t> encoder_widths = {256, 64};
    std::vector<size_t> decoder_widths = {64, 256};
    SimulationConfig simulation;

    void validate() const;
    Kv to_kv() const;
    static RunConfig from_kv(const Kv& kv);
    static RunConfig load(const std::string& path);
};

}  // namespace survwalk
