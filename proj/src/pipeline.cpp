#include "statescope/pipeline.hpp"

#include <algorithm>

#include "statescope/error.hpp"

namespace statescope::pipeline {

namespace {

constexpr const char* kStage = "pipeline";

bool fully_annotated(const Session& session) {
    return !session.windows.empty() &&
           std::all_of(session.windows.begin(), session.windows.end(), [](const auto& w) { return w.annotation.has_value(); });
}

}  // namespace

EmbedMode parse_embed(const std::string& text) {
    if (text == "tsne") return EmbedMode::Tsne;
    if (text == "raw") return EmbedMode::Raw;
    throw Error("UnknownEmbedding", kStage, "unknown embedding `" + text + "`");
}

std::optional<features::Modality> parse_modality(const std::string& text) {
    if (text == "all") return std::nullopt;
    for (std::size_t m = 0; m < features::kModalities; ++m) {
        if (text == features::kModalityNames[m]) return static_cast<features::Modality>(m);
    }
    throw Error("UnknownModality", kStage, "unknown modality `" + text + "`");
}

nlohmann::json config_to_json(const PipelineConfig& c) {
    return {{"algorithm", std::string(cluster::to_string(c.algorithm))},
            {"embed", c.embed == EmbedMode::Tsne ? "tsne" : "raw"},
            {"seed", c.seed},
            {"k", c.k ? nlohmann::json(*c.k) : nlohmann::json(nullptr)},
            {"eps", c.eps ? nlohmann::json(*c.eps) : nlohmann::json(nullptr)},
            {"min_pts", c.min_pts},
            {"perplexity", c.perplexity},
            {"n_iter", c.n_iter},
            {"modality", c.modality ? nlohmann::json(std::string(features::kModalityNames[static_cast<std::size_t>(*c.modality)]))
                                    : nlohmann::json("all")}};
}

PipelineConfig config_from_json(const nlohmann::json& doc) {
    PipelineConfig c;
    if (doc.is_null()) return c;
    if (!doc.is_object()) throw Error("SchemaViolation", kStage, "pipeline config must be an object");
    try {
        if (doc.contains("algorithm")) c.algorithm = cluster::parse_algorithm(doc.at("algorithm").get<std::string>());
        if (doc.contains("embed")) c.embed = parse_embed(doc.at("embed").get<std::string>());
        if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
        if (doc.contains("k") && !doc.at("k").is_null()) c.k = doc.at("k").get<int>();
        if (doc.contains("eps") && !doc.at("eps").is_null()) c.eps = doc.at("eps").get<double>();
        if (doc.contains("min_pts")) c.min_pts = doc.at("min_pts").get<int>();
        if (doc.contains("perplexity")) c.perplexity = doc.at("perplexity").get<double>();
        if (doc.contains("n_iter")) c.n_iter = doc.at("n_iter").get<int>();
        if (doc.contains("modality")) c.modality = parse_modality(doc.at("modality").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaViolation", kStage, std::string("pipeline config: ") + e.what());
    }
    if (c.k && *c.k < 1) throw Error("InvalidK", kStage, "k must be at least 1");
    return c;
}

std::optional<fsm::CorrelationMatrix> annotated_correlation(const Session& session, const std::vector<int>& clusters) {
    std::vector<std::string> annotations;
    std::vector<int> picked;
    for (std::size_t i = 0; i < session.windows.size() && i < clusters.size(); ++i) {
        if (!session.windows[i].annotation) continue;
        annotations.push_back(*session.windows[i].annotation);
        picked.push_back(clusters[i]);
    }
    if (annotations.empty()) return std::nullopt;
    return fsm::correlation_matrix(annotations, picked);
}

std::optional<fsm::Fsm> current_fsm(const Session& session) {
    if (!fully_annotated(session)) return std::nullopt;
    return fsm::build_fsm(session);
}

PipelineResult run_pipeline(const Session& session, const PipelineConfig& config) {
    const auto annotated = static_cast<std::size_t>(std::count_if(
        session.windows.begin(), session.windows.end(), [](const auto& w) { return w.annotation.has_value(); }));
    if (annotated < kMinAnnotatedWindows) {
        throw Error("TooFewWindows", kStage,
                    "pipeline needs at least " + std::to_string(kMinAnnotatedWindows) + " annotated windows, session has " +
                        std::to_string(annotated));
    }

    PipelineResult out;
    out.config = config;
    std::vector<MultiModalWindow> windows = session.windows;
    for (const auto& w : windows) out.window_ids.push_back(w.window_id);

    out.reference = features::reference_peaks(windows);
    features::attach_emanation(windows, out.reference.bins());
    out.features = features::session_features(windows);
    if (config.modality) {
        for (auto& f : out.features) f = features::keep_modality(f, *config.modality);
    }
    const auto standardized = features::fit_standardize(features::to_matrix(out.features));

    cluster::Points points;
    if (config.embed == EmbedMode::Tsne) {
        embed::TsneConfig tc;
        tc.perplexity = config.perplexity;
        tc.n_iter = config.n_iter;
        tc.seed = config.seed;
        out.embedding = embed::tsne(standardized.matrix, tc);
        points = out.embedding->points;
    } else {
        points = standardized.matrix;
    }

    auto density = [&]() {
        double eps = 0.0;
        if (config.eps) {
            eps = *config.eps;
        } else {
            const auto choice = cluster::auto_eps(points, config.min_pts);
            eps = choice.eps;
            out.eps_fallback = choice.used_fallback;
        }
        out.eps = eps;
        return cluster::dbscan(points, eps, config.min_pts);
    };

    switch (config.algorithm) {
        case cluster::Algorithm::Dbscan: out.clusters = density(); break;
        case cluster::Algorithm::KMeans:
        case cluster::Algorithm::Gmm: {
            const int k = config.k ? *config.k : std::max(1, density().k);
            out.clusters = config.algorithm == cluster::Algorithm::KMeans ? cluster::kmeans(points, k, config.seed).assignment
                                                                          : cluster::gmm(points, k, config.seed).assignment;
            break;
        }
    }
    out.correlation = annotated_correlation(session, out.clusters.labels);
    out.fsm = current_fsm(session);
    return out;
}

nlohmann::json embedding_to_json(const embed::Embedding& e, const std::vector<std::int64_t>& window_ids) {
    return {{"window_ids", window_ids}, {"points", e.points}, {"kl_initial", e.kl_initial}, {"kl_final", e.kl_final}};
}

nlohmann::json clusters_to_json(const PipelineResult& r) {
    return {{"algorithm", std::string(cluster::to_string(r.clusters.algorithm))},
            {"k", r.clusters.k},
            {"quality", r.clusters.quality},
            {"eps", r.eps ? nlohmann::json(*r.eps) : nlohmann::json(nullptr)},
            {"eps_fallback", r.eps_fallback},
            {"reference_bins", r.reference.bins()},
            {"window_ids", r.window_ids},
            {"labels", r.clusters.labels}};
}

}  // namespace statescope::pipeline
