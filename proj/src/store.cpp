#include "statescope/store.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "statescope/digest.hpp"
#include "statescope/error.hpp"

namespace fs = std::filesystem;

namespace statescope::store {

namespace {

constexpr const char* kStage = "store";

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '-' || c == '_' || c == '.'; });
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

void remove_quietly(const fs::path& p) {
    std::error_code ec;
    fs::remove(p, ec);
}

}  // namespace

fs::path resolve_root(const std::optional<std::string>& flag) {
    if (flag && !flag->empty()) return *flag;
    if (const char* env = std::getenv(kDataDirEnv); env && *env) return env;
    return "statescope-data";
}

IngestRequest ingest_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error("SchemaViolation", "ingest", "ingest body must be an object");
    try {
        IngestRequest r;
        r.power_csv = doc.value("power_csv", "");
        r.network_csv = doc.value("network_csv", "");
        r.window_ms = doc.value("window_ms", std::int64_t{1000});
        r.fft_size = doc.value("fft_size", std::size_t{256});
        if (doc.contains("iq")) {
            const auto& iq = doc.at("iq");
            r.iq_header_json = iq.at("header").dump();
            r.iq_payload = base64_decode(iq.at("payload_base64").get<std::string>());
        }
        if (doc.contains("spectra")) {
            for (const auto& s : doc.at("spectra")) {
                r.spectra.push_back({s.at("t_ms").get<TimestampMs>(), s.at("psd").get<std::vector<double>>()});
            }
        }
        if (doc.contains("psd_unit")) {
            const auto unit = doc.at("psd_unit").get<std::string>();
            if (unit != "linear" && unit != "db") throw Error("SchemaViolation", "ingest", "psd_unit must be linear or db");
            r.spectra_unit = unit == "linear" ? PsdUnit::Linear : PsdUnit::Decibel;
        }
        if (doc.contains("events")) {
            for (const auto& e : doc.at("events")) r.events.push_back({e.at("t_ms").get<TimestampMs>(), e.at("kind").get<std::string>()});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaViolation", "ingest", e.what());
    }
}

Session ingest_traces(const std::string& session_id, const IngestRequest& request) {
    if (request.window_ms <= 0) throw Error("InvalidWindow", "ingest", "window_ms must be positive");
    const auto power = request.power_csv.empty() ? PowerTrace{} : parse_power_trace(request.power_csv);
    const auto network = request.network_csv.empty() ? NetworkTrace{} : parse_network_trace(request.network_csv);
    EmanationInput emanation;
    emanation.fft_size = request.fft_size;
    emanation.spectra = request.spectra;
    Session session;
    session.session_id = session_id;
    session.psd_unit = request.spectra_unit;
    if (request.iq_header_json) {
        const auto* bytes = reinterpret_cast<const std::byte*>(request.iq_payload.data());
        emanation.iq = parse_iq_trace(*request.iq_header_json, std::span<const std::byte>(bytes, request.iq_payload.size()));
        session.psd_unit = PsdUnit::Decibel;
    }
    std::vector<TimestampMs> times;
    for (const auto& e : request.events) times.push_back(e.t_ms);
    session.windows = window_session(power, network, emanation, times, request.window_ms);
    session.events = bind_events(session.windows, request.events);
    validate_session(session);
    return session;
}

void add_event(Session& session, const std::string& kind, TimestampMs t_ms) {
    if (kind.empty()) throw Error("InvalidEvent", "ingest", "event kind is empty");
    const EventMark mark{t_ms, kind};
    auto bound = bind_events(session.windows, std::span<const EventMark>(&mark, 1)).front();
    std::int64_t next_id = 0;
    for (const auto& e : session.events) next_id = std::max(next_id, e.event_id + 1);
    bound.event_id = next_id;
    auto at = std::upper_bound(session.events.begin(), session.events.end(), bound,
                               [](const auto& a, const auto& b) { return a.t_ms < b.t_ms; });
    session.events.insert(at, bound);
}

void annotate(Session& session, const std::string& label, std::int64_t from_window, std::int64_t to_window) {
    if (label.empty()) throw Error("EmptyLabel", "annotate", "label is empty");
    if (label == verify::kUnknown) throw Error("ReservedLabel", "annotate", "`UNKNOWN` is reserved");
    if (from_window > to_window) std::swap(from_window, to_window);
    if (!session.find_window(from_window) || !session.find_window(to_window)) {
        throw Error("UnknownWindow", "annotate",
                    "window range " + std::to_string(from_window) + ".." + std::to_string(to_window) + " is not in the session");
    }
    ensure_label(session, label, LabelOrigin::Human);
    for (auto& w : session.windows) {
        if (w.window_id >= from_window && w.window_id <= to_window) w.annotation = label;
    }
    prune_labels(session);
}

std::vector<EventMark> parse_event_marks(std::string_view text) {
    std::vector<EventMark> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty()) continue;
        if (lineno == 1 && t.rfind("t_ms", 0) == 0) continue;
        const auto comma = t.find(',');
        if (comma == std::string::npos) throw Error("MalformedLine", "ingest", "line " + std::to_string(lineno) + ": expected t_ms,kind");
        TimestampMs ts = 0;
        const auto num = trim(t.substr(0, comma));
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), ts);
        const auto kind = trim(t.substr(comma + 1));
        if (ec != std::errc{} || p != num.data() + num.size() || kind.empty()) {
            throw Error("MalformedLine", "ingest", "line " + std::to_string(lineno) + ": expected t_ms,kind");
        }
        out.push_back({ts, kind});
    }
    return out;
}

std::string data_hash(const Session& session) {
    nlohmann::json doc = session_to_json(session);
    doc.erase("session_id");
    doc.erase("events");
    doc.erase("labels");
    for (auto& w : doc.at("windows")) {
        w.erase("annotation");
        w.erase("cluster");
    }
    return sha256_hex(doc.dump());
}

std::string label_hash(const Session& session) {
    nlohmann::json doc;
    doc["labels"] = session_to_json(session).at("labels");
    doc["events"] = session_to_json(session).at("events");
    nlohmann::json ann = nlohmann::json::array();
    for (const auto& w : session.windows) ann.push_back(w.annotation ? nlohmann::json(*w.annotation) : nlohmann::json(nullptr));
    doc["annotations"] = ann;
    return sha256_hex(doc.dump());
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw Error("StoreUnavailable", kStage, "cannot create " + root_.string() + ": " + ec.message(), ErrorKind::Io);
}

fs::path SessionStore::dir(const std::string& id) const {
    if (!valid_id(id)) throw Error("InvalidSessionId", kStage, "invalid session id `" + id + "`");
    return root_ / id;
}

std::mutex& SessionStore::lock_for(const std::string& id) {
    std::lock_guard guard(registry_mutex_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

bool SessionStore::exists(const std::string& id) const {
    return valid_id(id) && fs::exists(root_ / id / "session.json");
}

std::vector<std::string> SessionStore::list() const {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (entry.is_directory() && fs::exists(entry.path() / "session.json")) out.push_back(entry.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string SessionStore::create(const std::optional<std::string>& requested, PsdUnit unit) {
    std::string id;
    if (requested) {
        id = *requested;
    } else {
        std::random_device rd;
        std::mt19937_64 rng((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
        static constexpr char kHex[] = "0123456789abcdef";
        do {
            id = "s-";
            for (int i = 0; i < 12; ++i) id += kHex[rng() % 16];
        } while (exists(id));
    }
    const auto d = dir(id);
    std::lock_guard guard(lock_for(id));
    if (exists(id)) throw Error("SessionExists", kStage, "session `" + id + "` already exists");
    Session s;
    s.session_id = id;
    s.psd_unit = unit;
    save_locked(id, s);
    return id;
}

Session SessionStore::load(const std::string& id) const {
    const auto path = dir(id) / "session.json";
    if (!fs::exists(path)) throw Error("SessionNotFound", kStage, "no session `" + id + "`");
    try {
        return session_from_json(nlohmann::json::parse(read_file(path.string())));
    } catch (const nlohmann::json::exception& e) {
        throw Error("CorruptSession", kStage, path.string() + ": " + e.what(), ErrorKind::Io);
    }
}

namespace {

void atomic_write(const fs::path& path, std::string_view contents) {
    std::ostringstream suffix;
    suffix << ".tmp-" << std::this_thread::get_id();
    fs::path tmp = path;
    tmp += suffix.str();
    write_file(tmp.string(), contents);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        remove_quietly(tmp);
        throw Error("WriteFailed", "store", path.string() + ": " + ec.message(), ErrorKind::Io);
    }
}

}  // namespace

void SessionStore::save_locked(const std::string& id, const Session& session) {
    std::error_code ec;
    fs::create_directories(dir(id), ec);
    if (ec) throw Error("WriteFailed", kStage, dir(id).string() + ": " + ec.message(), ErrorKind::Io);
    atomic_write(dir(id) / "session.json", dump_session(session));
}

void SessionStore::put(const std::string& id, Session session) {
    session.session_id = id;
    validate_session(session);
    std::lock_guard guard(lock_for(id));
    if (!exists(id)) throw Error("SessionNotFound", kStage, "no session `" + id + "`");
    save_locked(id, session);
    refresh_derived(id, session);
}

Session SessionStore::mutate(const std::string& id, const std::function<void(Session&)>& change) {
    std::lock_guard guard(lock_for(id));
    Session s = load(id);
    change(s);
    s.session_id = id;
    validate_session(s);
    save_locked(id, s);
    refresh_derived(id, s);
    return s;
}

fs::path SessionStore::artifact_path(const std::string& id, const std::string& name) const {
    return dir(id) / "artifacts" / name;
}

std::optional<std::string> SessionStore::read_artifact(const std::string& id, const std::string& name) const {
    const auto p = artifact_path(id, name);
    if (!fs::exists(p)) return std::nullopt;
    return read_file(p.string());
}

nlohmann::json SessionStore::manifest(const std::string& id) const {
    const auto text = read_artifact(id, kManifest);
    if (!text) return nlohmann::json::object();
    return nlohmann::json::parse(*text);
}

void SessionStore::write_artifact(const std::string& id, const std::string& name, const std::string& contents,
                                  nlohmann::json& manifest) {
    std::error_code ec;
    fs::create_directories(dir(id) / "artifacts", ec);
    if (ec) throw Error("WriteFailed", kStage, ec.message(), ErrorKind::Io);
    atomic_write(artifact_path(id, name), contents);
    manifest["files"][name] = sha256_hex(contents);
}

void SessionStore::refresh_derived(const std::string& id, const Session& session) {
    auto m = manifest(id);
    if (m.empty()) return;
    if (m.value("data_hash", "") != data_hash(session)) {
        std::error_code ec;
        fs::remove_all(dir(id) / "artifacts", ec);
        return;
    }
    const auto labels = label_hash(session);
    if (m.value("label_hash", "") == labels) return;

    for (const char* name : {kCorrelationArtifact, kFsmArtifact, kClassifierArtifact}) {
        remove_quietly(artifact_path(id, name));
        if (m.contains("files")) m["files"].erase(name);
    }
    if (const auto clusters = read_artifact(id, kClustersArtifact)) {
        const auto labels_vec = nlohmann::json::parse(*clusters).at("labels").get<std::vector<int>>();
        if (const auto corr = pipeline::annotated_correlation(session, labels_vec)) {
            write_artifact(id, kCorrelationArtifact, fsm::correlation_to_json(*corr).dump(2), m);
        }
    }
    if (const auto machine = pipeline::current_fsm(session)) {
        write_artifact(id, kFsmArtifact, fsm::export_fsm(*machine).dump(2), m);
    }
    m["label_hash"] = labels;
    atomic_write(artifact_path(id, kManifest), m.dump(2));
}

pipeline::PipelineResult SessionStore::run_pipeline(const std::string& id, const pipeline::PipelineConfig& config) {
    std::lock_guard guard(lock_for(id));
    const Session session = load(id);
    auto result = pipeline::run_pipeline(session, config);

    // Pipeline outputs replace the previous run's; a trained classifier
    // survives because it depends only on the session.
    auto old = manifest(id);
    nlohmann::json m = {{"data_hash", data_hash(session)}, {"label_hash", label_hash(session)}, {"files", nlohmann::json::object()}};
    for (const char* name : {kConfigArtifact, kFeaturesArtifact, kEmbeddingArtifact, kClustersArtifact,
                             kCorrelationArtifact, kFsmArtifact}) {
        remove_quietly(artifact_path(id, name));
    }
    if (old.contains("files") && old["files"].contains(kClassifierArtifact) &&
        old.value("label_hash", "") == m["label_hash"] && old.value("data_hash", "") == m["data_hash"]) {
        m["files"][kClassifierArtifact] = old["files"][kClassifierArtifact];
    } else {
        remove_quietly(artifact_path(id, kClassifierArtifact));
    }
    write_artifact(id, kConfigArtifact, pipeline::config_to_json(config).dump(2), m);
    write_artifact(id, kFeaturesArtifact, features::features_to_csv(result.features), m);
    if (result.embedding) {
        write_artifact(id, kEmbeddingArtifact, pipeline::embedding_to_json(*result.embedding, result.window_ids).dump(2), m);
    }
    write_artifact(id, kClustersArtifact, pipeline::clusters_to_json(result).dump(2), m);
    if (result.correlation) write_artifact(id, kCorrelationArtifact, fsm::correlation_to_json(*result.correlation).dump(2), m);
    if (result.fsm) write_artifact(id, kFsmArtifact, fsm::export_fsm(*result.fsm).dump(2), m);
    atomic_write(artifact_path(id, kManifest), m.dump(2));
    return result;
}

TrainedModel SessionStore::train(const std::string& id, std::uint64_t seed) {
    std::lock_guard guard(lock_for(id));
    const Session session = load(id);
    auto trained = verify::train_session(session, seed);
    TrainedModel model{std::move(trained.classifier), fsm::build_fsm(session), std::move(trained.holdout)};

    auto m = manifest(id);
    if (m.empty() || m.value("data_hash", "") != data_hash(session)) {
        std::error_code ec;
        fs::remove_all(dir(id) / "artifacts", ec);
        m = {{"data_hash", data_hash(session)}, {"files", nlohmann::json::object()}};
    }
    m["label_hash"] = label_hash(session);
    const nlohmann::json doc = {{"classifier", verify::classifier_to_json(model.classifier)},
                                {"fsm", fsm::export_fsm(model.fsm)},
                                {"holdout", cluster::report_to_json(model.holdout)}};
    write_artifact(id, kClassifierArtifact, doc.dump(2), m);
    atomic_write(artifact_path(id, kManifest), m.dump(2));
    return model;
}

TrainedModel SessionStore::load_model(const std::string& id) const {
    if (!exists(id)) throw Error("SessionNotFound", kStage, "no session `" + id + "`");
    const auto text = read_artifact(id, kClassifierArtifact);
    if (!text) throw Error("ArtifactMissing", kStage, "session `" + id + "` has no trained classifier");
    const auto doc = nlohmann::json::parse(*text);
    TrainedModel model;
    model.classifier = verify::classifier_from_json(doc.at("classifier"));
    model.fsm = fsm::import_fsm(doc.at("fsm"));
    return model;
}

}  // namespace statescope::store
