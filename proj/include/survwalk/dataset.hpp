#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "survwalk/config.hpp"
#include "survwalk/tensor.hpp"

namespace survwalk {

struct SurvivalRecord {
    Tensor<float> features;  // flattened pixels, each in [0, 1]
    float time = 0.0f;       // follow-up time in days, > 0
    int event = 0;           // 1 = observed event, 0 = censored
    int class_label = -1;    // simulation ground truth, -1 when unknown
};

struct SurvivalDataset {
    std::vector<SurvivalRecord> records;
    std::string provenance;  // "simulated" | "idx"
    uint64_t seed = 0;
    size_t image_rows = 0;
    size_t image_cols = 0;

    size_t size() const { return records.size(); }
    size_t feature_dim() const { return records.empty() ? 0 : records[0].features.numel(); }

    // Enforces the type invariants: non-empty, >= 1 event, pixels in [0,1],
    // times positive, consistent feature widths.
    void validate() const;

    void save(const std::string& path) const;
    static SurvivalDataset load(const std::string& path);

    // Feature matrix [n, p] for a subset of records (all when indices empty).
    Tensor<float> feature_matrix(const std::vector<size_t>& indices = {}) const;
};

SurvivalDataset simulate(const SimulationConfig& config);

// Reads IDX image/label pairs (big-endian magic 0x00000803 / 0x00000801),
// scales pixels to [0,1], then attaches survival times per label with the
// same exponential scheme simulate() uses.
SurvivalDataset load_idx(const std::string& image_path, const std::string& label_path,
                         const SimulationConfig& config);

// Indices sorted by descending time, ties kept in original order, so the
// risk-set sum over {j : t_j >= t_i} becomes a cumulative sum.
std::vector<size_t> order_for_risk_sets(const std::vector<double>& times);
std::vector<size_t> order_for_risk_sets(const SurvivalDataset& dataset);

// Exponential censoring rate c with mean_k c / (c + lambda_k) = target,
// solved by bisection; lambda_k = base_rate * exp(hazard_slope * k).
double censoring_rate_for(const SimulationConfig& config);

}  // namespace survwalk
