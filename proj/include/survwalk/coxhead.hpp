#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "survwalk/dataset.hpp"
#include "survwalk/error.hpp"
#include "survwalk/graph.hpp"
#include "survwalk/numeric.hpp"
#include "survwalk/tensor.hpp"

namespace survwalk {

// Linear predictor over the latent code: no hidden layer, no bias.
template <typename T>
struct CoxParams {
    Tensor<T> psi;  // [d]

    void check_dim(size_t latent_dim) const {
        if (psi.rank() != 1 || psi.numel() != latent_dim) {
            fail_invalid("cox: psi has " + std::to_string(psi.numel()) +
                         " weights, latent dimension is " + std::to_string(latent_dim));
        }
    }

    template <typename U>
    CoxParams<U> cast() const {
        return {psi.template cast<U>()};
    }
};

struct LossWeights {
    double tau = 0.5;   // joint-objective mix
    double beta = 1.0;  // KL weight inside the ELBO

    void validate() const {
        if (!(tau >= 0.0 && tau <= 1.0)) fail_invalid("loss weights: tau must be in [0,1]");
        if (!(beta >= 0.0)) fail_invalid("loss weights: beta must be >= 0");
    }
};

inline double risk_score(const std::vector<double>& z, const std::vector<double>& psi) {
    if (z.size() != psi.size()) {
        fail_invalid("risk_score: z length " + std::to_string(z.size()) + " != psi length " +
                     std::to_string(psi.size()));
    }
    double r = 0.0;
    for (size_t i = 0; i < z.size(); ++i) r += psi[i] * z[i];
    return r;
}

// For each position in a descending-time ordering, the index of the last
// position sharing its time: risk sets include every tie at t_i.
inline std::vector<size_t> tie_group_ends(const std::vector<double>& sorted_times) {
    std::vector<size_t> ends(sorted_times.size());
    if (sorted_times.empty()) return ends;
    const size_t n = sorted_times.size();
    ends[n - 1] = n - 1;
    for (size_t k = n - 1; k-- > 0;) {
        ends[k] = sorted_times[k + 1] == sorted_times[k] ? ends[k + 1] : k;
    }
    return ends;
}

// Negative partial Cox log-likelihood, normalized by the event count:
//   -(1/sum(delta)) * sum_i delta_i * (r_i - log sum_{j: t_j >= t_i} exp(r_j))
// evaluated with one descending-time pass and a cumulative logsumexp.
inline double cox_loss(const std::vector<double>& risks, const std::vector<double>& times,
                       const std::vector<int>& events) {
    const size_t n = risks.size();
    if (times.size() != n || events.size() != n) {
        fail_invalid("cox_loss: risks/times/events lengths disagree");
    }
    if (n == 0) fail_invalid("cox_loss: empty inputs");
    size_t n_events = 0;
    for (int e : events) n_events += static_cast<size_t>(e != 0);
    if (n_events == 0) fail_invalid("all observations censored");

    const std::vector<size_t> perm = order_for_risk_sets(times);
    std::vector<double> sorted_risks(n), sorted_times(n);
    for (size_t k = 0; k < n; ++k) {
        sorted_risks[k] = risks[perm[k]];
        sorted_times[k] = times[perm[k]];
    }
    const std::vector<double> cum = cumulative_logsumexp(sorted_risks);
    const std::vector<size_t> ends = tie_group_ends(sorted_times);

    double acc = 0.0;
    for (size_t k = 0; k < n; ++k) {
        if (events[perm[k]] != 0) acc += sorted_risks[k] - cum[ends[k]];
    }
    return -acc / static_cast<double>(n_events);
}

// (tau/n) * sum(elbo_terms) + (1 - tau) * cox
inline double joint_loss(const std::vector<double>& elbo_terms, double cox,
                         const LossWeights& weights) {
    weights.validate();
    if (elbo_terms.empty()) fail_invalid("joint_loss: empty elbo terms");
    double s = 0.0;
    for (double v : elbo_terms) s += v;
    return weights.tau * s / static_cast<double>(elbo_terms.size()) + (1.0 - weights.tau) * cox;
}

// ---------------------------------------------------------------------------
// Graph builders

// risks r = z . psi for a batch: [n, d] x [d, 1] -> [n]
template <typename T>
int risk_graph(Graph<T>& g, int z, int psi_column) {
    const size_t n = g.value(z).rows();
    return g.reshape(g.matmul(z, psi_column), {n});
}

// Same loss as cox_loss, differentiable w.r.t. the risks node [n].
template <typename T>
int cox_loss_graph(Graph<T>& g, int risks, const std::vector<double>& times,
                   const std::vector<int>& events) {
    const size_t n = g.value(risks).numel();
    if (times.size() != n || events.size() != n) {
        fail_invalid("cox_loss: risks/times/events lengths disagree");
    }
    if (n == 0) fail_invalid("cox_loss: empty inputs");
    size_t n_events = 0;
    for (int e : events) n_events += static_cast<size_t>(e != 0);
    if (n_events == 0) fail_invalid("all observations censored");

    const std::vector<size_t> perm = order_for_risk_sets(times);
    std::vector<double> sorted_times(n);
    for (size_t k = 0; k < n; ++k) sorted_times[k] = times[perm[k]];
    const std::vector<size_t> ends = tie_group_ends(sorted_times);

    Tensor<T> mask = Tensor<T>::zeros({n});
    for (size_t k = 0; k < n; ++k) mask.data[k] = events[perm[k]] != 0 ? T(1) : T(0);

    int sorted = g.gather(risks, perm);
    int lse = g.gather(g.cumlogsumexp(sorted), ends);
    int terms = g.mul(g.constant(std::move(mask)), g.sub(sorted, lse));
    return g.scale(g.sum(terms), static_cast<T>(-1.0 / static_cast<double>(n_events)));
}

// (tau/n) * sum(elbo_terms [n]) + (1 - tau) * cox (scalar node)
template <typename T>
int joint_graph(Graph<T>& g, int elbo_terms, int cox, const LossWeights& weights) {
    weights.validate();
    const size_t n = g.value(elbo_terms).numel();
    if (n == 0) fail_invalid("joint_loss: empty elbo terms");
    int vae_part = g.scale(g.sum(elbo_terms), static_cast<T>(weights.tau / static_cast<double>(n)));
    int cox_part = g.scale(cox, static_cast<T>(1.0 - weights.tau));
    return g.add(vae_part, cox_part);
}

}  // namespace survwalk
