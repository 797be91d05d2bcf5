#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "statescope/cluster.hpp"
#include "statescope/features.hpp"
#include "statescope/fsm.hpp"
#include "statescope/trace.hpp"

namespace statescope::verify {

inline constexpr const char* kUnknown = "UNKNOWN";

struct StateClassifier {
    features::Scaler scaler;
    std::map<std::string, std::vector<double>> centroids;  // standardized space
    double unknown_threshold = 0.0;
    std::vector<std::size_t> reference_bins;  // emanation bins the features were computed at

    bool operator==(const StateClassifier&) const = default;
};

struct TrainResult {
    StateClassifier classifier;
    cluster::EvalReport holdout;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

/// Stratified 80/20 split (at least one row on each side per label),
/// standardization on the training rows, one centroid per label.
TrainResult train(std::span<const features::FeatureVector> vectors, std::span<const std::string> labels,
                  std::uint64_t split_seed);

/// Derives the emanation reference from the session itself, then trains on
/// every window's annotation.
TrainResult train_session(const Session& session, std::uint64_t split_seed);

struct Prediction {
    std::string label;  // kUnknown when beyond the threshold
    double distance = 0.0;
    bool unknown() const { return label == kUnknown; }
};

Prediction predict(const StateClassifier& classifier, const features::FeatureVector& vector);
Prediction predict_standardized(const StateClassifier& classifier, std::span<const double> standardized);

/// Window features at the classifier's emanation bins.
features::FeatureVector classifier_features(const StateClassifier& classifier, const MultiModalWindow& window);

struct VerificationStep {
    std::int64_t window_id = 0;
    std::string predicted;
    double distance = 0.0;
    bool transition_valid = true;  // true when no event preceded the window
    std::optional<std::string> event;
};

nlohmann::json step_to_json(const VerificationStep& step);

using StepSink = std::function<void(const VerificationStep&)>;

/// Classifies windows in order and checks each observed event against the
/// FSM, handing every step to `sink` as soon as it is produced.
void stepwise_verify(const StateClassifier& classifier, const fsm::Fsm& machine, const Session& session,
                     const StepSink& sink);
std::vector<VerificationStep> stepwise_verify(const StateClassifier& classifier, const fsm::Fsm& machine,
                                              const Session& session);

inline constexpr int kClassifierSchema = 1;

nlohmann::json classifier_to_json(const StateClassifier& classifier);
StateClassifier classifier_from_json(const nlohmann::json& doc);

}  // namespace statescope::verify
