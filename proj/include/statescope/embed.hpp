#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace statescope::embed {

using Matrix = std::vector<std::vector<double>>;

struct TsneConfig {
    double perplexity = 30.0;  // clamped to (N - 1) / 3 at run time
    int n_iter = 1000;
    double exaggeration_factor = 12.0;
    int exaggeration_iters = 250;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Embedding {
    Matrix points;  // N x 2
    double kl_initial = 0.0;
    double kl_final = 0.0;
};

struct RowCalibration {
    double sigma = 0.0;
    std::vector<double> probabilities;
    double entropy_bits = 0.0;
    bool converged = false;
};

/// Finds the Gaussian bandwidth whose conditional distribution over the
/// row's squared distances has base-2 entropy log2(perplexity). Returns the
/// best bracket after 200 bisection steps when it does not converge.
RowCalibration calibrate_row(std::span<const double> squared_distances, double perplexity);

/// Symmetrized joint affinities (p_j|i + p_i|j) / 2N, row-major N x N.
std::vector<double> joint_affinities(const Matrix& data, double perplexity);

/// KL(P || Q) for the Student-t kernel at the given layout.
double kl_divergence(std::span<const double> p, const Matrix& layout);

/// Exact gradient of KL(P || Q) with respect to each embedded point.
Matrix tsne_gradient(std::span<const double> p, const Matrix& layout);

/// Exact O(N^2) t-SNE into two dimensions. Identical input rows end up at
/// one shared point.
Embedding tsne(const Matrix& data, const TsneConfig& config);

/// Rows identical to an earlier row receive a tiny seeded offset so the
/// bandwidth search stays bounded.
Matrix jitter_duplicates(const Matrix& data, std::uint64_t seed, double magnitude = 1e-9);

/// `window_id,x,y` per row.
std::string embedding_to_csv(const Embedding& embedding, std::span<const std::int64_t> window_ids);

}  // namespace statescope::embed
