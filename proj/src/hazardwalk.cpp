#include "survwalk/hazardwalk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "survwalk/error.hpp"
#include "survwalk/numeric.hpp"

namespace survwalk {

WalkDirection parse_direction(const std::string& s) {
    if (s == "increase") return WalkDirection::increase;
    if (s == "decrease") return WalkDirection::decrease;
    fail_invalid("direction must be 'increase' or 'decrease', got '" + s + "'");
}

WalkEstimator parse_estimator(const std::string& s) {
    if (s == "closed_form") return WalkEstimator::closed_form;
    if (s == "monte_carlo") return WalkEstimator::monte_carlo;
    fail_invalid("estimator must be 'closed_form' or 'monte_carlo', got '" + s + "'");
}

void WalkConfig::validate() const {
    if (mc_samples < 1) fail_invalid("walk: mc_samples must be >= 1");
    if (!(step_size > 0.0)) fail_invalid("walk: step_size must be > 0");
    if (snapshot_every < 1) fail_invalid("walk: snapshot_every must be >= 1");
}

namespace {

void check_dims(const LatentGaussian& xi, const std::vector<double>& psi) {
    if (xi.dim() != psi.size()) {
        fail_invalid("hazard: latent dimension " + std::to_string(xi.dim()) +
                     " != psi length " + std::to_string(psi.size()));
    }
}

}  // namespace

double expected_hazard_closed(const LatentGaussian& xi, const std::vector<double>& psi) {
    check_dims(xi, psi);
    const std::vector<double> sigma = xi.sigma();
    double exponent = 0.0;
    for (size_t d = 0; d < psi.size(); ++d) {
        exponent += psi[d] * xi.mu[d] + 0.5 * psi[d] * psi[d] * sigma[d] * sigma[d];
    }
    return guarded_exp(exponent);
}

HazardGradient expected_hazard_closed_grad(const LatentGaussian& xi,
                                           const std::vector<double>& psi) {
    HazardGradient g;
    g.value = expected_hazard_closed(xi, psi);
    const std::vector<double> sigma = xi.sigma();
    g.d_mu.resize(psi.size());
    g.d_sigma.resize(psi.size());
    for (size_t d = 0; d < psi.size(); ++d) {
        g.d_mu[d] = psi[d] * g.value;
        g.d_sigma[d] = psi[d] * psi[d] * sigma[d] * g.value;
    }
    return g;
}

HazardGradient expected_hazard_mc(const LatentGaussian& xi, const std::vector<double>& psi,
                                  uint32_t mc_samples, Rng& rng) {
    check_dims(xi, psi);
    if (mc_samples < 1) fail_invalid("expected_hazard_mc: need at least one sample");
    const size_t d = xi.dim();
    const std::vector<double> sigma = xi.sigma();

    HazardGradient g;
    g.d_mu.assign(d, 0.0);
    g.d_sigma.assign(d, 0.0);
    std::vector<double> eps(d);
    for (uint32_t b = 0; b < mc_samples; ++b) {
        double r = 0.0;
        for (size_t k = 0; k < d; ++k) {
            eps[k] = rng.normal();
            r += psi[k] * (xi.mu[k] + sigma[k] * eps[k]);
        }
        const double h = guarded_exp(r);
        g.value += h;
        for (size_t k = 0; k < d; ++k) {
            g.d_mu[k] += h * psi[k];
            g.d_sigma[k] += h * psi[k] * eps[k];
        }
    }
    const double inv = 1.0 / static_cast<double>(mc_samples);
    g.value *= inv;
    for (size_t k = 0; k < d; ++k) {
        g.d_mu[k] *= inv;
        g.d_sigma[k] *= inv;
    }
    return g;
}

namespace {

HazardGradient walk_gradient(const LatentGaussian& xi, const std::vector<double>& psi,
                             const WalkConfig& config, Rng& rng) {
    return config.estimator == WalkEstimator::closed_form
               ? expected_hazard_closed_grad(xi, psi)
               : expected_hazard_mc(xi, psi, config.mc_samples, rng);
}

// Applies one normalized step from a precomputed gradient; stationary when
// the gradient vanishes. Coordinates the gradient does not touch are skipped
// outright so they stay bit-identical across the walk.
WalkStep apply_step(const LatentGaussian& xi, const HazardGradient& grad,
                    const WalkConfig& config) {
    const size_t d = xi.dim();
    std::vector<double> g_mu = grad.d_mu;
    std::vector<double> g_ls(d);  // chain rule sigma -> log sigma
    const std::vector<double> sigma = xi.sigma();
    double norm_sq = 0.0;
    for (size_t k = 0; k < d; ++k) {
        g_ls[k] = grad.d_sigma[k] * sigma[k];
        norm_sq += g_mu[k] * g_mu[k] + g_ls[k] * g_ls[k];
    }
    if (norm_sq == 0.0) return {xi, true};

    const double scale =
        (config.direction == WalkDirection::increase ? 1.0 : -1.0) * config.step_size /
        std::sqrt(norm_sq);
    std::vector<double> mu = xi.mu;
    std::vector<double> log_var = xi.log_var;
    for (size_t k = 0; k < d; ++k) {
        if (g_mu[k] != 0.0) mu[k] += scale * g_mu[k];
        if (g_ls[k] != 0.0) {
            // stay inside the LatentGaussian log_var range: |log sigma| <= 5
            const double ls = std::clamp(0.5 * log_var[k] + scale * g_ls[k], -5.0, 5.0);
            log_var[k] = 2.0 * ls;
        }
    }
    return {LatentGaussian(std::move(mu), std::move(log_var)), false};
}

}  // namespace

WalkStep walk_step(const LatentGaussian& xi, const std::vector<double>& psi,
                   const WalkConfig& config, Rng& rng) {
    config.validate();
    return apply_step(xi, walk_gradient(xi, psi, config, rng), config);
}

WalkTrajectory run_walk(const std::vector<double>& x, const ModelState& model,
                        const WalkConfig& config) {
    config.validate();
    const ModelView view = make_view(model);
    Rng rng(config.seed, 3);

    WalkTrajectory traj;
    LatentGaussian xi = encode(x, view.encoder);

    auto push = [&](uint64_t iteration, const LatentGaussian& at, double hazard, bool frame) {
        WalkRecord rec;
        rec.iteration = iteration;
        rec.xi = at;
        rec.expected_hazard = hazard;
        if (frame) {
            rec.frame = decode(at.mu, view.decoder);
            rec.has_frame = true;
        }
        traj.records.push_back(std::move(rec));
    };

    for (uint32_t k = 0; k < config.iterations; ++k) {
        const HazardGradient grad = walk_gradient(xi, view.psi, config, rng);
        push(k, xi, grad.value, k % config.snapshot_every == 0);
        WalkStep step = apply_step(xi, grad, config);
        if (step.stationary) {
            traj.status = WalkStatus::stationary;
            WalkRecord& last = traj.records.back();
            if (!last.has_frame) {
                last.frame = decode(last.xi.mu, view.decoder);
                last.has_frame = true;
            }
            return traj;
        }
        xi = std::move(step.xi);
    }
    const HazardGradient final_grad = walk_gradient(xi, view.psi, config, rng);
    push(config.iterations, xi, final_grad.value, true);
    return traj;
}

void write_trajectory_csv(const WalkTrajectory& trajectory, const std::string& path) {
    if (trajectory.records.empty()) fail_invalid("trajectory is empty");
    const size_t d = trajectory.records.front().xi.dim();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_io("cannot open for writing: " + path);

    out << "iteration,expected_hazard";
    for (size_t k = 1; k <= d; ++k) out << ",mu_" << k;
    for (size_t k = 1; k <= d; ++k) out << ",sigma_" << k;
    out << "\n";
    for (const WalkRecord& rec : trajectory.records) {
        out << rec.iteration << "," << format_double(rec.expected_hazard);
        for (double v : rec.xi.mu) out << "," << format_double(v);
        for (double v : rec.xi.sigma()) out << "," << format_double(v);
        out << "\n";
    }
    if (!out) fail_io("write failed: " + path);
}

}  // namespace survwalk
