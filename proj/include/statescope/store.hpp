#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "statescope/pipeline.hpp"
#include "statescope/trace.hpp"
#include "statescope/verify.hpp"

namespace statescope::store {

inline constexpr const char* kDataDirEnv = "STATESCOPE_DATA_DIR";

/// --session-dir wins, then STATESCOPE_DATA_DIR, then ./statescope-data.
std::filesystem::path resolve_root(const std::optional<std::string>& flag);

// --- session mutations shared by the CLI and the HTTP API -------------------

struct IngestRequest {
    std::string power_csv;
    std::string network_csv;
    std::optional<std::string> iq_header_json;
    std::string iq_payload;
    std::vector<TimedSpectrum> spectra;
    PsdUnit spectra_unit = PsdUnit::Decibel;
    std::vector<EventMark> events;
    std::int64_t window_ms = 1000;
    std::size_t fft_size = 256;
};

IngestRequest ingest_from_json(const nlohmann::json& doc);

/// Windows the traces and binds the event marks.
Session ingest_traces(const std::string& session_id, const IngestRequest& request);

/// Event at the boundary starting at t_ms.
void add_event(Session& session, const std::string& kind, TimestampMs t_ms);

/// Annotates the windows with ids in [from_window, to_window].
void annotate(Session& session, const std::string& label, std::int64_t from_window, std::int64_t to_window);

/// Events file: one `t_ms,kind` per line, optional header.
std::vector<EventMark> parse_event_marks(std::string_view text);

// --- store ------------------------------------------------------------------

/// Artifact names written under <root>/<id>/artifacts/.
inline constexpr const char* kConfigArtifact = "config.json";
inline constexpr const char* kFeaturesArtifact = "features.csv";
inline constexpr const char* kEmbeddingArtifact = "embedding.json";
inline constexpr const char* kClustersArtifact = "clusters.json";
inline constexpr const char* kCorrelationArtifact = "correlation.json";
inline constexpr const char* kFsmArtifact = "fsm.json";
inline constexpr const char* kClassifierArtifact = "classifier.json";
inline constexpr const char* kManifest = "manifest.json";

/// Hash of what the features depend on (window samples and spectra).
std::string data_hash(const Session& session);
/// Hash of annotations, labels and events.
std::string label_hash(const Session& session);

struct TrainedModel {
    verify::StateClassifier classifier;
    fsm::Fsm fsm;
    cluster::EvalReport holdout;
};

/// One directory per session holding session.json and an artifacts/
/// directory. Writes go through a temporary file and a rename, so readers
/// never see a half-written file. Mutations of one session are serialized.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }

    std::string create(const std::optional<std::string>& id, PsdUnit unit = PsdUnit::Decibel);
    bool exists(const std::string& id) const;
    std::vector<std::string> list() const;

    Session load(const std::string& id) const;
    /// Replaces the session wholesale (its id is forced to `id`).
    void put(const std::string& id, Session session);
    /// Applies `change` under the session lock, validates, saves, and drops
    /// artifacts whose inputs changed. Returns the saved session.
    Session mutate(const std::string& id, const std::function<void(Session&)>& change);

    pipeline::PipelineResult run_pipeline(const std::string& id, const pipeline::PipelineConfig& config);
    TrainedModel train(const std::string& id, std::uint64_t seed);
    TrainedModel load_model(const std::string& id) const;

    std::optional<std::string> read_artifact(const std::string& id, const std::string& name) const;
    std::filesystem::path artifact_path(const std::string& id, const std::string& name) const;
    nlohmann::json manifest(const std::string& id) const;

private:
    std::filesystem::path dir(const std::string& id) const;
    std::mutex& lock_for(const std::string& id);
    void save_locked(const std::string& id, const Session& session);
    void write_artifact(const std::string& id, const std::string& name, const std::string& contents,
                        nlohmann::json& manifest);
    void refresh_derived(const std::string& id, const Session& session);

    std::filesystem::path root_;
    std::mutex registry_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace statescope::store
