#include "statescope/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "statescope/error.hpp"
#include "stats.hpp"

namespace statescope::verify {

namespace {

constexpr const char* kStage = "verify";

std::vector<double> row_of(const features::FeatureVector& v) { return {v.values.begin(), v.values.end()}; }

}  // namespace

TrainResult train(std::span<const features::FeatureVector> vectors, std::span<const std::string> labels,
                  std::uint64_t split_seed) {
    if (vectors.size() != labels.size()) {
        throw Error("LengthMismatch", kStage,
                    std::to_string(vectors.size()) + " vectors vs " + std::to_string(labels.size()) + " labels");
    }
    if (vectors.empty()) throw Error("TooFewPerState", kStage, "no labeled vectors");
    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

    // Rows are put in value order before shuffling so the split, and hence
    // the classifier, does not depend on the order rows were supplied in.
    std::mt19937_64 rng(split_seed);
    TrainResult out;
    for (auto& [label, rows] : by_label) {
        if (rows.size() < 2) throw Error("TooFewPerState", kStage, "label `" + label + "` has fewer than two vectors");
        std::stable_sort(rows.begin(), rows.end(),
                         [&](std::size_t a, std::size_t b) { return vectors[a].values < vectors[b].values; });
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto n = static_cast<long>(rows.size());
        const long n_test = std::clamp(std::lround(0.2 * static_cast<double>(n)), 1L, n - 1);
        out.test_rows.insert(out.test_rows.end(), rows.begin(), rows.begin() + n_test);
        std::vector<std::size_t> train_part(rows.begin() + n_test, rows.end());
        std::stable_sort(train_part.begin(), train_part.end(),
                         [&](std::size_t a, std::size_t b) { return vectors[a].values < vectors[b].values; });
        out.train_rows.insert(out.train_rows.end(), train_part.begin(), train_part.end());
    }

    std::vector<std::vector<double>> train_matrix;
    train_matrix.reserve(out.train_rows.size());
    for (auto i : out.train_rows) train_matrix.push_back(row_of(vectors[i]));
    // A single training row (one label with two vectors) has no spread to
    // estimate: centre on it and keep the raw scale.
    features::Standardized standardized;
    if (train_matrix.size() == 1) {
        standardized.scaler.means = train_matrix.front();
        standardized.scaler.stds.assign(features::kFeatureDim, 1.0);
        standardized.scaler.constant.assign(features::kFeatureDim, false);
        standardized.matrix = standardized.scaler.apply(train_matrix);
    } else {
        standardized = features::fit_standardize(train_matrix);
    }

    StateClassifier& c = out.classifier;
    c.scaler = std::move(standardized.scaler);
    std::map<std::string, std::vector<std::size_t>> train_by_label;
    for (std::size_t r = 0; r < out.train_rows.size(); ++r) train_by_label[labels[out.train_rows[r]]].push_back(r);
    double spread = 0.0;
    for (const auto& [label, rows] : train_by_label) {
        std::vector<double> centroid(features::kFeatureDim, 0.0);
        for (auto r : rows) {
            for (std::size_t d = 0; d < centroid.size(); ++d) centroid[d] += standardized.matrix[r][d];
        }
        for (auto& v : centroid) v /= static_cast<double>(rows.size());
        double mean_dist = 0.0;
        for (auto r : rows) mean_dist += std::sqrt(detail::squared_distance(standardized.matrix[r], centroid));
        spread = std::max(spread, mean_dist / static_cast<double>(rows.size()));
        c.centroids[label] = std::move(centroid);
    }
    c.unknown_threshold = std::max(3.0 * spread, 1e-9);

    std::vector<std::string> predicted;
    std::vector<std::string> truth;
    for (auto i : out.test_rows) {
        predicted.push_back(predict(c, vectors[i]).label);
        truth.push_back(labels[i]);
    }
    out.holdout = cluster::evaluate_named(predicted, truth);
    return out;
}

TrainResult train_session(const Session& session, std::uint64_t split_seed) {
    std::vector<MultiModalWindow> windows = session.windows;
    const auto bins = features::reference_peaks(windows).bins();
    features::attach_emanation(windows, bins);
    std::vector<std::string> labels;
    for (const auto& w : windows) {
        if (!w.annotation) throw Error("UnannotatedWindow", kStage, "window " + std::to_string(w.window_id));
        labels.push_back(*w.annotation);
    }
    const auto vectors = features::session_features(windows);
    auto out = train(vectors, labels, split_seed);
    out.classifier.reference_bins = bins;
    return out;
}

Prediction predict_standardized(const StateClassifier& classifier, std::span<const double> x) {
    Prediction best;
    best.distance = std::numeric_limits<double>::infinity();
    // Map order is lexicographic, so a strict comparison keeps the smallest
    // label on ties.
    for (const auto& [label, centroid] : classifier.centroids) {
        const double d = std::sqrt(detail::squared_distance(x, centroid));
        if (d < best.distance) {
            best.distance = d;
            best.label = label;
        }
    }
    if (!(best.distance <= classifier.unknown_threshold)) best.label = kUnknown;
    return best;
}

Prediction predict(const StateClassifier& classifier, const features::FeatureVector& vector) {
    const auto x = classifier.scaler.apply(std::span<const double>(vector.values));
    return predict_standardized(classifier, x);
}

features::FeatureVector classifier_features(const StateClassifier& classifier, const MultiModalWindow& window) {
    MultiModalWindow w = window;
    features::attach_emanation(std::span<MultiModalWindow>(&w, 1), classifier.reference_bins);
    return features::window_features(w);
}

nlohmann::json step_to_json(const VerificationStep& step) {
    return {{"window_id", step.window_id},
            {"predicted", step.predicted},
            {"distance", step.distance},
            {"transition_valid", step.transition_valid},
            {"event", step.event ? nlohmann::json(*step.event) : nlohmann::json(nullptr)}};
}

void stepwise_verify(const StateClassifier& classifier, const fsm::Fsm& machine, const Session& session,
                     const StepSink& sink) {
    std::map<std::int64_t, const TransitionEvent*> event_into;
    for (const auto& e : session.events) event_into.emplace(e.to_window, &e);
    std::optional<std::string> previous;
    for (const auto& w : session.windows) {
        const auto p = predict(classifier, classifier_features(classifier, w));
        VerificationStep step;
        step.window_id = w.window_id;
        step.predicted = p.label;
        step.distance = p.distance;
        if (auto it = event_into.find(w.window_id); it != event_into.end()) {
            step.event = it->second->kind;
            step.transition_valid = previous && machine.has_transition(*previous, it->second->kind, p.label);
        }
        previous = p.label;
        sink(step);
    }
}

std::vector<VerificationStep> stepwise_verify(const StateClassifier& classifier, const fsm::Fsm& machine,
                                              const Session& session) {
    std::vector<VerificationStep> out;
    stepwise_verify(classifier, machine, session, [&](const VerificationStep& s) { out.push_back(s); });
    return out;
}

nlohmann::json classifier_to_json(const StateClassifier& c) {
    nlohmann::json centroids = nlohmann::json::object();
    for (const auto& [label, v] : c.centroids) centroids[label] = v;
    return {{"schema", kClassifierSchema},
            {"scaler", {{"means", c.scaler.means}, {"stds", c.scaler.stds}, {"constant", c.scaler.constant}}},
            {"centroids", centroids},
            {"unknown_threshold", c.unknown_threshold},
            {"reference_bins", c.reference_bins}};
}

StateClassifier classifier_from_json(const nlohmann::json& doc) {
    try {
        if (doc.value("schema", 0) != kClassifierSchema) {
            throw Error("SchemaViolation", kStage, "unsupported classifier schema version");
        }
        StateClassifier c;
        const auto& s = doc.at("scaler");
        c.scaler.means = s.at("means").get<std::vector<double>>();
        c.scaler.stds = s.at("stds").get<std::vector<double>>();
        c.scaler.constant = s.at("constant").get<std::vector<bool>>();
        for (const auto& [label, v] : doc.at("centroids").items()) c.centroids[label] = v.get<std::vector<double>>();
        c.unknown_threshold = doc.at("unknown_threshold").get<double>();
        c.reference_bins = doc.at("reference_bins").get<std::vector<std::size_t>>();
        const auto dim = c.scaler.means.size();
        if (c.centroids.empty() || !(c.unknown_threshold > 0.0) || c.scaler.stds.size() != dim ||
            c.scaler.constant.size() != dim ||
            std::any_of(c.centroids.begin(), c.centroids.end(), [&](const auto& kv) { return kv.second.size() != dim; })) {
            throw Error("SchemaViolation", kStage, "inconsistent classifier document");
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaViolation", kStage, std::string("classifier: ") + e.what());
    }
}

}  // namespace statescope::verify
