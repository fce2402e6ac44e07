#pragma once
// shared test scaffolding: finite-difference gradient checks and temp dirs
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "survwalk/graph.hpp"
#include "survwalk/rng.hpp"
#include "survwalk/tensor.hpp"

namespace testutil {

struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("svhw_test_" + name)) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::string file(const std::string& leaf) const { return (path / leaf).string(); }
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void spit(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Central-difference check of a scalar-rooted graph against its backward
// pass. `build` receives a fresh graph plus the param node ids (one per init
// tensor, same order) and returns the root id.
template <typename Builder>
struct FdReport {
    double worst = 0.0;
    std::string where;
};

inline double rel_err(double analytic, double numeric) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / scale;
}

template <typename Builder>
double check_gradients(const std::vector<survwalk::Tensor<double>>& inits, Builder build,
                       double h = 1e-6) {
    using survwalk::Graph;
    using survwalk::Tensor;

    Graph<double> g;
    std::vector<int> ids;
    ids.reserve(inits.size());
    for (const Tensor<double>& t : inits) ids.push_back(g.param(t));
    const int root = build(g, ids);
    g.backward(root);
    std::vector<Tensor<double>> grads;
    grads.reserve(ids.size());
    for (int id : ids) grads.push_back(g.grad(id));

    const auto eval = [&](const std::vector<Tensor<double>>& at) {
        Graph<double> fresh;
        std::vector<int> fresh_ids;
        fresh_ids.reserve(at.size());
        for (const Tensor<double>& t : at) fresh_ids.push_back(fresh.param(t));
        const int r = build(fresh, fresh_ids);
        return fresh.value(r).data[0];
    };

    double worst = 0.0;
    for (size_t p = 0; p < inits.size(); ++p) {
        for (size_t k = 0; k < inits[p].numel(); ++k) {
            std::vector<Tensor<double>> lo = inits;
            std::vector<Tensor<double>> hi = inits;
            lo[p].data[k] -= h;
            hi[p].data[k] += h;
            const double fd = (eval(hi) - eval(lo)) / (2.0 * h);
            worst = std::max(worst, rel_err(grads[p].data[k], fd));
        }
    }
    return worst;
}

inline survwalk::Tensor<double> random_tensor(std::vector<size_t> shape, survwalk::Rng& rng,
                                              double lo = -1.0, double hi = 1.0) {
    survwalk::Tensor<double> t = survwalk::Tensor<double>::zeros(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace testutil
