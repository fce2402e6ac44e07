#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survwalk/dataset.hpp"
#include "survwalk/model.hpp"
#include "survwalk/tensor.hpp"

namespace survwalk {

struct EmbeddingRow {
    size_t id = 0;
    std::vector<double> mu;
    std::vector<double> sigma;
    double risk = 0.0;  // psi . mu
    double time = 0.0;
    int event = 0;
    int class_label = -1;
};

struct EmbeddingTable {
    std::vector<EmbeddingRow> rows;

    void validate() const;  // unique ids, consistent vector widths
    // header: id,mu_1..,sigma_1..,risk,time,event,class
    void write_csv(const std::string& path) const;
};

EmbeddingTable embed_dataset(const ModelState& model, const SurvivalDataset& data);

// Harrell's C: over pairs with t_i < t_j and delta_i = 1, the fraction where
// r_i > r_j; risk ties credit 0.5; tied times and censored-censored excluded.
double c_index(const std::vector<double>& risks, const std::vector<double>& times,
               const std::vector<int>& events);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Spearman between class label and per-class mean risk.
double hazard_rank_agreement(const EmbeddingTable& table);

struct Pca2 {
    Tensor<double> projection;        // [n, 2]
    Tensor<double> components;        // [d, 2], orthonormal columns
    std::vector<double> eigenvalues;  // all d, descending
    std::vector<double> mean;         // column means removed before projecting
};

// Top-2 principal components via covariance eigendecomposition; each
// component's largest-magnitude loading is made positive so signs are stable.
Pca2 pca2(const Tensor<double>& points);

// Cyclic Jacobi eigendecomposition of a symmetric matrix; pairs returned in
// descending eigenvalue order, eigenvectors as columns.
void symmetric_eig(const Tensor<double>& matrix, std::vector<double>& eigenvalues,
                   Tensor<double>& eigenvectors);

struct EvalReport {
    double c_index = 0.0;
    double hazard_rank_agreement = 0.0;
    double mean_reconstruction_nll = 0.0;
};

EvalReport evaluate(const ModelState& model, const SurvivalDataset& data);

}  // namespace survwalk
