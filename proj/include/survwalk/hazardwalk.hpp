#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survwalk/model.hpp"
#include "survwalk/rng.hpp"
#include "survwalk/vae.hpp"

namespace survwalk {

enum class WalkDirection { increase, decrease };
enum class WalkEstimator { closed_form, monte_carlo };

WalkDirection parse_direction(const std::string& s);
WalkEstimator parse_estimator(const std::string& s);

struct WalkConfig {
    uint32_t iterations = 1500;
    uint32_t mc_samples = 128;  // B
    double step_size = 1e-2;    // eta
    WalkDirection direction = WalkDirection::increase;
    uint32_t snapshot_every = 100;
    WalkEstimator estimator = WalkEstimator::closed_form;
    uint64_t seed = 0;

    void validate() const;
};

// E[exp(psi.z)] and its gradient in (mu, sigma) coordinates.
struct HazardGradient {
    double value = 0.0;
    std::vector<double> d_mu;
    std::vector<double> d_sigma;
};

// Lognormal moment identity: exp(psi.mu + 1/2 sum_d psi_d^2 sigma_d^2), with
// the exponent under the shared exp clamp so the walk plateaus instead of
// overflowing; the gradient keeps its direction past the plateau.
double expected_hazard_closed(const LatentGaussian& xi, const std::vector<double>& psi);
HazardGradient expected_hazard_closed_grad(const LatentGaussian& xi,
                                           const std::vector<double>& psi);

// Pathwise Monte-Carlo estimate of the same quantity: z_b = mu + sigma * eps_b,
// mean over B of exp(psi.z_b) and of its per-sample gradient.
HazardGradient expected_hazard_mc(const LatentGaussian& xi, const std::vector<double>& psi,
                                  uint32_t mc_samples, Rng& rng);

struct WalkStep {
    LatentGaussian xi;
    bool stationary = false;  // gradient was exactly zero; xi echoes the input
};

// One update in (mu, log sigma) coordinates with the unit-normalized gradient
// and step size eta; direction picks the sign.
WalkStep walk_step(const LatentGaussian& xi, const std::vector<double>& psi,
                   const WalkConfig& config, Rng& rng);

enum class WalkStatus { completed, stationary };

struct WalkRecord {
    uint64_t iteration = 0;
    LatentGaussian xi;
    double expected_hazard = 0.0;
    bool has_frame = false;
    std::vector<double> frame;  // decode(mu) at snapshots, pixels in (0,1)
};

struct WalkTrajectory {
    std::vector<WalkRecord> records;  // one per iteration, 0-based
    WalkStatus status = WalkStatus::completed;

    const WalkRecord& front() const { return records.front(); }
    const WalkRecord& back() const { return records.back(); }
};

// xi_0 = encode(x); per iteration records (iteration, xi, expected hazard),
// decoding mu into a frame every snapshot_every iterations and at the end.
WalkTrajectory run_walk(const std::vector<double>& x, const ModelState& model,
                        const WalkConfig& config);

// CSV with header iteration,expected_hazard,mu_1..mu_d,sigma_1..sigma_d
void write_trajectory_csv(const WalkTrajectory& trajectory, const std::string& path);

}  // namespace survwalk
