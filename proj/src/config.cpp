#include "survwalk/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "survwalk/error.hpp"

namespace survwalk {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_head(const std::string& path) {
    size_t dot = path.find('.');
    if (dot == std::string::npos) return {path, ""};
    return {path.substr(0, dot), path.substr(dot + 1)};
}

}  // namespace

Kv Kv::parse(const std::string& text) {
    Kv root;
    std::vector<Kv*> stack{&root};
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::string line = trim(raw);
        if (line.empty()) continue;
        if (line == "}") {
            if (stack.size() == 1) fail_data("config line " + std::to_string(lineno) + ": unmatched '}'");
            stack.pop_back();
            continue;
        }
        if (line.back() == '{') {
            std::string name = trim(line.substr(0, line.size() - 1));
            if (name.empty()) fail_data("config line " + std::to_string(lineno) + ": block needs a name");
            stack.push_back(&stack.back()->ensure_child(name));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            fail_data("config line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail_data("config line " + std::to_string(lineno) + ": empty key");
        stack.back()->set(key, value);
    }
    if (stack.size() != 1) fail_data("config: unclosed block at end of input");
    return root;
}

void Kv::serialize_into(std::string& out, int depth) const {
    const std::string pad(static_cast<size_t>(depth) * 2, ' ');
    for (const auto& [k, v] : values_) {
        out += pad;
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    for (const auto& [k, node] : children_) {
        out += pad;
        out += k;
        out += " {\n";
        node.serialize_into(out, depth + 1);
        out += pad;
        out += "}\n";
    }
}

std::string Kv::serialize() const {
    std::string out;
    serialize_into(out, 0);
    return out;
}

const std::string* Kv::find(const std::string& path) const {
    auto [head, rest] = split_head(path);
    if (!rest.empty()) {
        const Kv* c = child(head);
        return c ? c->find(rest) : nullptr;
    }
    for (const auto& [k, v] : values_)
        if (k == head) return &v;
    return nullptr;
}

bool Kv::has(const std::string& path) const { return find(path) != nullptr; }

const std::string& Kv::get(const std::string& path) const {
    const std::string* v = find(path);
    if (!v) fail_data("config: missing key '" + path + "'");
    return *v;
}

std::string Kv::get_or(const std::string& path, const std::string& fallback) const {
    const std::string* v = find(path);
    return v ? *v : fallback;
}

void Kv::set(const std::string& path, const std::string& value) {
    auto [head, rest] = split_head(path);
    if (!rest.empty()) {
        ensure_child(head).set(rest, value);
        return;
    }
    for (auto& [k, v] : values_) {
        if (k == head) {
            v = value;
            return;
        }
    }
    values_.emplace_back(head, value);
}

void Kv::set_int(const std::string& path, int64_t value) { set(path, std::to_string(value)); }
void Kv::set_uint(const std::string& path, uint64_t value) { set(path, std::to_string(value)); }
void Kv::set_double(const std::string& path, double value) { set(path, format_double(value)); }

int64_t Kv::get_int(const std::string& path) const {
    const std::string& s = get(path);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (errno != 0 || end == s.c_str() || *end != '\0') {
        fail_data("config: key '" + path + "' is not an integer: '" + s + "'");
    }
    return v;
}

uint64_t Kv::get_uint(const std::string& path) const {
    int64_t v = get_int(path);
    if (v < 0) fail_data("config: key '" + path + "' must be non-negative");
    return static_cast<uint64_t>(v);
}

double Kv::get_double(const std::string& path) const {
    const std::string& s = get(path);
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end == s.c_str() || *end != '\0') {
        fail_data("config: key '" + path + "' is not a number: '" + s + "'");
    }
    return v;
}

int64_t Kv::get_int_or(const std::string& path, int64_t fallback) const {
    return has(path) ? get_int(path) : fallback;
}

uint64_t Kv::get_uint_or(const std::string& path, uint64_t fallback) const {
    return has(path) ? get_uint(path) : fallback;
}

double Kv::get_double_or(const std::string& path, double fallback) const {
    return has(path) ? get_double(path) : fallback;
}

const Kv* Kv::child(const std::string& name) const {
    for (const auto& [k, node] : children_)
        if (k == name) return &node;
    return nullptr;
}

Kv& Kv::ensure_child(const std::string& name) {
    for (auto& [k, node] : children_)
        if (k == name) return node;
    children_.emplace_back(name, Kv{});
    return children_.back().second;
}

std::string format_double(double v) {
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string format_size_list(const std::vector<size_t>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<size_t> parse_size_list(const std::string& s) {
    std::vector<size_t> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        errno = 0;
        char* end = nullptr;
        long long v = std::strtoll(item.c_str(), &end, 10);
        if (errno != 0 || end == item.c_str() || *end != '\0' || v <= 0) {
            fail_data("config: bad width list entry '" + item + "'");
        }
        out.push_back(static_cast<size_t>(v));
    }
    return out;
}

void SimulationConfig::validate() const {
    if (n_classes < 1) fail_invalid("simulation: n_classes must be >= 1");
    if (samples_per_class < 1) fail_invalid("simulation: samples_per_class must be >= 1");
    if (image_size < 1) fail_invalid("simulation: image_size must be >= 1");
    if (!(base_rate > 0)) fail_invalid("simulation: base_rate must be > 0");
    if (!(hazard_slope > 0)) fail_invalid("simulation: hazard_slope must be > 0");
    if (!(censoring_fraction >= 0) || censoring_fraction >= 1) {
        fail_invalid("simulation: censoring_fraction must lie in [0, 1)");
    }
}

void RunConfig::validate() const {
    if (latent_dim < 1) fail_invalid("config: latent_dim must be >= 1");
    if (!(beta >= 0)) fail_invalid("config: beta must be >= 0");
    if (!(tau >= 0 && tau <= 1)) fail_invalid("config: tau must lie in [0, 1]");
    if (!(lr_vae > 0) || !(lr_cox > 0)) fail_invalid("config: learning rates must be > 0");
    if (batch_size < 1) fail_invalid("config: batch_size must be >= 1");
    if (image_size < 1) fail_invalid("config: image_size must be >= 1");
    simulation.validate();
}

Kv RunConfig::to_kv() const {
    Kv kv;
    kv.set_uint("seed", seed);
    kv.set_uint("latent_dim", latent_dim);
    kv.set_double("beta", beta);
    kv.set_double("tau", tau);
    kv.set_double("lr_vae", lr_vae);
    kv.set_double("lr_cox", lr_cox);
    kv.set_uint("epochs", epochs);
    kv.set_uint("batch_size", batch_size);
    kv.set_uint("image_size", image_size);
    kv.set("encoder_widths", format_size_list(encoder_widths));
    kv.set("decoder_widths", format_size_list(decoder_widths));
    Kv& sim = kv.ensure_child("simulation");
    sim.set_uint("n_classes", simulation.n_classes);
    sim.set_uint("samples_per_class", simulation.samples_per_class);
    sim.set_uint("image_size", simulation.image_size);
    sim.set_double("base_rate", simulation.base_rate);
    sim.set_double("hazard_slope", simulation.hazard_slope);
    sim.set_double("censoring_fraction", simulation.censoring_fraction);
    sim.set_uint("seed", simulation.seed);
    return kv;
}

RunConfig RunConfig::from_kv(const Kv& kv) {
    RunConfig cfg;
    cfg.seed = kv.get_uint_or("seed", cfg.seed);
    cfg.latent_dim = static_cast<uint32_t>(kv.get_uint_or("latent_dim", cfg.latent_dim));
    cfg.beta = kv.get_double_or("beta", cfg.beta);
    cfg.tau = kv.get_double_or("tau", cfg.tau);
    cfg.lr_vae = kv.get_double_or("lr_vae", cfg.lr_vae);
    cfg.lr_cox = kv.get_double_or("lr_cox", cfg.lr_cox);
    cfg.epochs = static_cast<uint32_t>(kv.get_uint_or("epochs", cfg.epochs));
    cfg.batch_size = static_cast<uint32_t>(kv.get_uint_or("batch_size", cfg.batch_size));
    cfg.image_size = static_cast<uint32_t>(kv.get_uint_or("image_size", cfg.image_size));
    if (kv.has("encoder_widths")) cfg.encoder_widths = parse_size_list(kv.get("encoder_widths"));
    if (kv.has("decoder_widths")) cfg.decoder_widths = parse_size_list(kv.get("decoder_widths"));
    SimulationConfig& sim = cfg.simulation;
    sim.n_classes = static_cast<uint32_t>(kv.get_uint_or("simulation.n_classes", sim.n_classes));
    sim.samples_per_class =
        static_cast<uint32_t>(kv.get_uint_or("simulation.samples_per_class", sim.samples_per_class));
    sim.image_size = static_cast<uint32_t>(kv.get_uint_or("simulation.image_size", sim.image_size));
    sim.base_rate = kv.get_double_or("simulation.base_rate", sim.base_rate);
    sim.hazard_slope = kv.get_double_or("simulation.hazard_slope", sim.hazard_slope);
    sim.censoring_fraction = kv.get_double_or("simulation.censoring_fraction", sim.censoring_fraction);
    sim.seed = kv.get_uint_or("simulation.seed", sim.seed);
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_io("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_kv(Kv::parse(buf.str()));
}

}  // namespace survwalk
