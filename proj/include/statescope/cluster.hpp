#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace statescope::cluster {

using Points = std::vector<std::vector<double>>;

inline constexpr int kNoise = -1;

enum class Algorithm { KMeans, Dbscan, Gmm };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

struct ClusterAssignment {
    std::vector<int> labels;  // kNoise for DBSCAN noise
    int k = 0;
    Algorithm algorithm = Algorithm::KMeans;
    double quality = 0.0;  // inertia (k-means), final log-likelihood (GMM), unused (DBSCAN)
};

struct KMeansResult {
    ClusterAssignment assignment;
    Points centroids;
    std::vector<double> inertia_history;  // after each assignment step
};

KMeansResult kmeans(const Points& points, int k, std::uint64_t seed, int max_iter = 300, double tol = 1e-6);

/// Density clustering; labels are numbered in order of each cluster's first
/// member in the input, so the partition does not depend on point order.
ClusterAssignment dbscan(const Points& points, double eps, int min_pts = 4);

struct EpsChoice {
    double eps = 0.0;
    bool used_fallback = false;
    std::vector<double> k_distances;  // ascending
};

/// Elbow of the ascending min_pts-th nearest-neighbour distance curve: the
/// point of largest upward curvature of the polyline (rank, distance). Falls
/// back to the 90th percentile when the curve is flat or never bends up.
/// The curvature is taken in the points' own units, so the elbow is sharpest
/// for data whose neighbour distances change slowly from rank to rank.
EpsChoice auto_eps(const Points& points, int min_pts = 4);

struct GmmResult {
    ClusterAssignment assignment;
    std::vector<std::vector<double>> responsibilities;  // N x k
    std::vector<double> weights;
    Points means;
    std::vector<std::vector<double>> covariances;  // row-major d x d
    std::vector<double> log_likelihood_history;
};

GmmResult gmm(const Points& points, int k, std::uint64_t seed, int max_iter = 200, double tol = 1e-8,
              double reg = 1e-6);

struct EvalReport {
    std::vector<std::string> true_labels;  // confusion rows
    std::vector<std::string> pred_labels;  // confusion columns; cluster ids as text, "-1" (noise) last
    std::vector<std::vector<std::int64_t>> confusion;
    std::vector<std::optional<std::size_t>> mapping;  // true label row -> matched column
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
};

/// Unsupervised evaluation: clusters are matched one-to-one to true labels
/// by maximum overlap (Hungarian); noise and unmatched clusters are errors.
EvalReport evaluate(const std::vector<int>& pred, const std::vector<std::string>& truth);

/// Supervised evaluation with the identity mapping between names; any
/// prediction outside the true label set counts as an error.
EvalReport evaluate_named(const std::vector<std::string>& pred, const std::vector<std::string>& truth);

nlohmann::json report_to_json(const EvalReport& report);
std::string confusion_table(const EvalReport& report);

/// Maximum-weight one-to-one assignment for a rows x cols weight matrix.
/// Returns for each row the matched column or -1.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights);

}  // namespace statescope::cluster
