#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "survwalk/error.hpp"
#include "survwalk/graph.hpp"
#include "survwalk/numeric.hpp"
#include "survwalk/rng.hpp"
#include "survwalk/tensor.hpp"

namespace survwalk {

// ---------------------------------------------------------------------------
// MLP parameters (shared by encoder and decoder)

template <typename T>
struct MlpLayer {
    Tensor<T> weight;  // [in, out]
    Tensor<T> bias;    // [out]
};

template <typename T>
struct MlpParams {
    std::vector<MlpLayer<T>> layers;

    size_t input_dim() const { return layers.front().weight.rows(); }
    size_t output_dim() const { return layers.back().weight.cols(); }

    void check_chain() const {
        if (layers.empty()) fail_invalid("mlp: no layers");
        for (size_t i = 0; i < layers.size(); ++i) {
            const MlpLayer<T>& l = layers[i];
            if (l.weight.rank() != 2 || l.bias.rank() != 1 ||
                l.bias.numel() != l.weight.cols()) {
                fail_invalid("mlp: layer " + std::to_string(i) + " has inconsistent shapes");
            }
            if (i > 0 && l.weight.rows() != layers[i - 1].weight.cols()) {
                fail_invalid("mlp: layer " + std::to_string(i) + " input width " +
                             std::to_string(l.weight.rows()) + " != previous output " +
                             std::to_string(layers[i - 1].weight.cols()));
            }
        }
    }

    template <typename U>
    MlpParams<U> cast() const {
        MlpParams<U> out;
        out.layers.reserve(layers.size());
        for (const MlpLayer<T>& l : layers) {
            out.layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
        }
        return out;
    }
};

// Glorot-uniform weights, zero biases; draw order is layer-major, row-major
// within a weight so initialization replays exactly for a given rng state.
template <typename T>
MlpParams<T> make_mlp(const std::vector<size_t>& sizes, Rng& rng) {
    if (sizes.size() < 2) fail_invalid("make_mlp: need at least input and output sizes");
    MlpParams<T> p;
    for (size_t i = 0; i + 1 < sizes.size(); ++i) {
        const size_t fan_in = sizes[i];
        const size_t fan_out = sizes[i + 1];
        if (fan_in == 0 || fan_out == 0) fail_invalid("make_mlp: zero layer width");
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        MlpLayer<T> layer{Tensor<T>::zeros({fan_in, fan_out}), Tensor<T>::zeros({fan_out})};
        for (T& w : layer.weight.data) w = static_cast<T>(rng.uniform(-limit, limit));
        p.layers.push_back(std::move(layer));
    }
    return p;
}

// ---------------------------------------------------------------------------
// LatentGaussian xi = (mu, sigma), stored as (mu, log_var)

struct LatentGaussian {
    std::vector<double> mu;
    std::vector<double> log_var;  // sigma^2 = exp(log_var)

    LatentGaussian() = default;
    LatentGaussian(std::vector<double> m, std::vector<double> lv)
        : mu(std::move(m)), log_var(std::move(lv)) {
        if (mu.size() != log_var.size()) {
            fail_invalid("LatentGaussian: mu length " + std::to_string(mu.size()) +
                         " != log_var length " + std::to_string(log_var.size()));
        }
        for (double v : mu) {
            if (!std::isfinite(v)) fail_invalid("LatentGaussian: non-finite mu entry");
        }
        for (double& v : log_var) {
            if (!std::isfinite(v)) fail_invalid("LatentGaussian: non-finite log_var entry");
            v = std::clamp(v, -10.0, 10.0);
        }
    }

    size_t dim() const { return mu.size(); }

    std::vector<double> sigma() const {
        std::vector<double> s(log_var.size());
        for (size_t i = 0; i < s.size(); ++i) s[i] = std::exp(0.5 * log_var[i]);
        return s;
    }
};

// ---------------------------------------------------------------------------
// Plain (graph-free) forward passes, used by embed/walk/eval and the oracles.

inline std::vector<double> mlp_forward(const std::vector<double>& x, const MlpParams<double>& p,
                                       bool terminal_sigmoid) {
    p.check_chain();
    if (x.size() != p.input_dim()) {
        fail_invalid("mlp: input length " + std::to_string(x.size()) + " != expected " +
                     std::to_string(p.input_dim()));
    }
    std::vector<double> h = x;
    for (size_t li = 0; li < p.layers.size(); ++li) {
        const MlpLayer<double>& l = p.layers[li];
        const size_t in = l.weight.rows();
        const size_t out = l.weight.cols();
        std::vector<double> y(out);
        for (size_t j = 0; j < out; ++j) {
            double acc = l.bias.data[j];
            for (size_t i = 0; i < in; ++i) acc += h[i] * l.weight.data[i * out + j];
            y[j] = acc;
        }
        const bool last = li + 1 == p.layers.size();
        if (!last) {
            for (double& v : y) v = v > 0.0 ? v : 0.0;
        } else if (terminal_sigmoid) {
            // sigmoid saturates to exactly 0/1 in floating point for large
            // logits; pin outputs strictly inside (0,1) at the log guard
            for (double& v : y) v = std::clamp(stable_sigmoid(v), kLogFloor, 1.0 - kLogFloor);
        }
        h = std::move(y);
    }
    return h;
}

inline LatentGaussian encode(const std::vector<double>& x, const MlpParams<double>& enc) {
    std::vector<double> out = mlp_forward(x, enc, false);
    if (out.size() % 2 != 0) fail_invalid("encode: encoder output width must be even (mu||log_var)");
    const size_t d = out.size() / 2;
    return LatentGaussian(std::vector<double>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d)),
                          std::vector<double>(out.begin() + static_cast<std::ptrdiff_t>(d), out.end()));
}

inline std::vector<double> reparameterize(const LatentGaussian& xi, const std::vector<double>& eps) {
    if (eps.size() != xi.dim()) {
        fail_invalid("reparameterize: eps length " + std::to_string(eps.size()) +
                     " != latent dim " + std::to_string(xi.dim()));
    }
    std::vector<double> z(xi.dim());
    for (size_t i = 0; i < z.size(); ++i) {
        z[i] = xi.mu[i] + std::exp(0.5 * xi.log_var[i]) * eps[i];
    }
    return z;
}

// KL(q || N(0, I)) = 1/2 sum_d (mu_d^2 + sigma_d^2 - 1 - log sigma_d^2)
inline double kl_divergence(const LatentGaussian& xi) {
    double acc = 0.0;
    for (size_t i = 0; i < xi.dim(); ++i) {
        acc += xi.mu[i] * xi.mu[i] + std::exp(xi.log_var[i]) - 1.0 - xi.log_var[i];
    }
    return 0.5 * acc;
}

inline std::vector<double> decode(const std::vector<double>& z, const MlpParams<double>& dec) {
    return mlp_forward(z, dec, true);
}

inline double bernoulli_nll(const std::vector<double>& x, const std::vector<double>& xhat) {
    if (x.size() != xhat.size()) {
        fail_invalid("bernoulli_nll: x length " + std::to_string(x.size()) + " != xhat length " +
                     std::to_string(xhat.size()));
    }
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        acc += x[i] * guarded_log(xhat[i]) + (1.0 - x[i]) * guarded_log(1.0 - xhat[i]);
    }
    return -acc;
}

inline double elbo_loss(const std::vector<double>& x, const LatentGaussian& xi,
                        const std::vector<double>& xhat, double beta) {
    if (beta < 0.0) fail_invalid("elbo_loss: beta must be >= 0");
    return bernoulli_nll(x, xhat) + beta * kl_divergence(xi);
}

// ---------------------------------------------------------------------------
// Graph builders: batched [n, .] versions of the same maps, for training and
// the finite-difference checks.

template <typename T>
struct MlpNodeIds {
    std::vector<std::pair<int, int>> layers;  // (weight, bias) per layer
};

template <typename T>
MlpNodeIds<T> mlp_into_graph(Graph<T>& g, const MlpParams<T>& p) {
    p.check_chain();
    MlpNodeIds<T> ids;
    for (const MlpLayer<T>& l : p.layers) {
        ids.layers.emplace_back(g.param(l.weight), g.param(l.bias));
    }
    return ids;
}

template <typename T>
int mlp_forward_graph(Graph<T>& g, int x, const MlpNodeIds<T>& ids, bool terminal_sigmoid) {
    int h = x;
    for (size_t li = 0; li < ids.layers.size(); ++li) {
        h = g.add(g.matmul(h, ids.layers[li].first), ids.layers[li].second);
        const bool last = li + 1 == ids.layers.size();
        if (!last) h = g.relu(h);
        else if (terminal_sigmoid) h = g.sigmoid(h);
    }
    return h;
}

// (mu, log_var) from a batch x: [n, p] -> two [n, d] nodes
template <typename T>
std::pair<int, int> encode_graph(Graph<T>& g, int x, const MlpNodeIds<T>& ids, size_t latent_dim) {
    int out = mlp_forward_graph(g, x, ids, false);
    const size_t width = g.value(out).cols();
    if (width != 2 * latent_dim) {
        fail_invalid("encode: encoder output width " + std::to_string(width) + " != 2*" +
                     std::to_string(latent_dim));
    }
    return {g.slice(out, 0, latent_dim), g.slice(out, latent_dim, latent_dim)};
}

// z = mu + exp(log_var / 2) * eps, the pathwise estimator
template <typename T>
int reparameterize_graph(Graph<T>& g, int mu, int log_var, int eps) {
    return g.add(mu, g.mul(g.exp(g.scale(log_var, static_cast<T>(0.5))), eps));
}

// per-sample KL vector [n]
template <typename T>
int kl_graph(Graph<T>& g, int mu, int log_var) {
    int inner = g.add(g.mul(mu, mu), g.add(g.exp(log_var), g.neg(log_var)));
    return g.scale(g.sum(g.shift(inner, static_cast<T>(-1)), 1), static_cast<T>(0.5));
}

// per-sample Bernoulli reconstruction NLL [n]; x must hold constants in [0,1]
template <typename T>
int bernoulli_nll_graph(Graph<T>& g, int x, int xhat) {
    int one_minus_x = g.shift(g.neg(x), static_cast<T>(1));
    int one_minus_xhat = g.shift(g.neg(xhat), static_cast<T>(1));
    int ll = g.add(g.mul(x, g.log(xhat)), g.mul(one_minus_x, g.log(one_minus_xhat)));
    return g.neg(g.sum(ll, 1));
}

// per-sample ELBO loss vector [n]: NLL + beta * KL
template <typename T>
int elbo_graph(Graph<T>& g, int x, int xhat, int mu, int log_var, T beta) {
    if (beta < static_cast<T>(0)) fail_invalid("elbo_loss: beta must be >= 0");
    return g.add(bernoulli_nll_graph(g, x, xhat), g.scale(kl_graph(g, mu, log_var), beta));
}

}  // namespace survwalk
