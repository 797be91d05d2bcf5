#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statescope/cluster.hpp"
#include "statescope/dsp.hpp"
#include "statescope/embed.hpp"
#include "statescope/features.hpp"
#include "statescope/fsm.hpp"
#include "statescope/trace.hpp"

namespace statescope::pipeline {

enum class EmbedMode { Tsne, Raw };

struct PipelineConfig {
    cluster::Algorithm algorithm = cluster::Algorithm::Dbscan;
    EmbedMode embed = EmbedMode::Tsne;
    std::uint64_t seed = 0;
    std::optional<int> k;       // k-means / GMM; defaults to the DBSCAN count
    std::optional<double> eps;  // DBSCAN; defaults to auto_eps
    int min_pts = 4;
    double perplexity = 30.0;
    int n_iter = 1000;
    std::optional<features::Modality> modality;  // keep a single modality block

    bool operator==(const PipelineConfig&) const = default;
};

nlohmann::json config_to_json(const PipelineConfig& config);
/// Missing keys keep their defaults; unknown values are validation errors.
PipelineConfig config_from_json(const nlohmann::json& doc);

EmbedMode parse_embed(const std::string& text);
/// "all" (nullopt), "power", "network" or "emanation".
std::optional<features::Modality> parse_modality(const std::string& text);

struct PipelineResult {
    PipelineConfig config;
    std::vector<std::int64_t> window_ids;
    dsp::PeakSet reference;
    std::vector<features::FeatureVector> features;
    std::optional<embed::Embedding> embedding;  // absent in raw mode
    cluster::ClusterAssignment clusters;
    std::optional<double> eps;                  // DBSCAN radius used (or used for the default k)
    bool eps_fallback = false;
    std::optional<fsm::CorrelationMatrix> correlation;  // needs annotated windows
    std::optional<fsm::Fsm> fsm;                        // needs every window annotated
};

inline constexpr std::size_t kMinAnnotatedWindows = 4;

/// Emanation reference -> features -> standardization -> embedding ->
/// clustering -> correlation. Errors keep the stage that raised them.
PipelineResult run_pipeline(const Session& session, const PipelineConfig& config);

/// Correlation over the annotated windows only; nullopt when none are.
std::optional<fsm::CorrelationMatrix> annotated_correlation(const Session& session, const std::vector<int>& clusters);

/// build_fsm when every window is annotated, otherwise nullopt.
std::optional<fsm::Fsm> current_fsm(const Session& session);

nlohmann::json embedding_to_json(const embed::Embedding& embedding, const std::vector<std::int64_t>& window_ids);
nlohmann::json clusters_to_json(const PipelineResult& result);

}  // namespace statescope::pipeline
