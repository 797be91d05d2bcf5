// statescope: batch front end over the session store.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "statescope/error.hpp"
#include "statescope/server.hpp"
#include "statescope/store.hpp"
#include "statescope/synth.hpp"

using namespace statescope;
using nlohmann::json;

namespace {

struct Common {
    std::optional<std::string> session_dir;
    std::string session_id;
    std::uint64_t seed = 0;
};

store::SessionStore open_store(const Common& c) { return store::SessionStore(store::resolve_root(c.session_dir)); }

void ensure_session(store::SessionStore& st, const std::string& id) {
    if (!st.exists(id)) st.create(id);
}

synth::GroundTruthDevice pick_device(const std::string& name) {
    if (name == "voice") return synth::voice_kit_fixture();
    if (name == "vision") return synth::vision_kit_fixture();
    return synth::device_from_json(json::parse(read_file(name)));
}

synth::ScenarioScript protocol_for(const std::string& device, const synth::GroundTruthDevice& d, int per_state,
                                   std::int64_t window_ms, std::uint64_t seed) {
    if (device == "voice") return synth::voice_kit_protocol(per_state, window_ms);
    if (device == "vision") return synth::vision_kit_protocol(per_state, window_ms);
    return synth::random_script(d, static_cast<int>(d.states.size()) * 4, 1, std::max(1, per_state / 4), window_ms, seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Side-channel state inference: synthesize or ingest sessions, cluster, collage, train, verify"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--session-dir", common.session_dir, "Session store root (overrides STATESCOPE_DATA_DIR)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "Simulate a ground-truth device into a session");
    std::string device = "voice";
    int per_state = 100;
    std::int64_t window_ms = 1000;
    double noise_scale = 1.0;
    std::string synth_out;
    bool interactions = false;
    synth_cmd->add_option("--device", device, "voice, vision, or a device JSON file")->capture_default_str();
    synth_cmd->add_option("--seed", common.seed, "Simulation seed")->capture_default_str();
    synth_cmd->add_option("--windows-per-state", per_state)->capture_default_str();
    synth_cmd->add_option("--window-ms", window_ms)->capture_default_str()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--noise-scale", noise_scale)->capture_default_str()->check(CLI::NonNegativeNumber);
    synth_cmd->add_option("--session-id", common.session_id, "Defaults to synth-<device>-<seed>");
    synth_cmd->add_option("--out", synth_out, "Also write the session JSON here");
    synth_cmd->add_flag("--per-interaction-labels", interactions, "Annotate i0, i1, ... instead of ground truth");

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "Window trace files into a session");
    std::string power_path, network_path, iq_header_path, iq_path, spectra_path, events_path, psd_unit = "db";
    std::size_t fft_size = 256;
    ingest_cmd->add_option("--session-id", common.session_id)->required();
    ingest_cmd->add_option("--power", power_path, "CSV timestamp_ms,current_ma");
    ingest_cmd->add_option("--network", network_path, "CSV timestamp_ms,bytes");
    ingest_cmd->add_option("--iq-header", iq_header_path, "IQ header JSON");
    ingest_cmd->add_option("--iq", iq_path, "Interleaved float32 IQ payload");
    ingest_cmd->add_option("--spectra", spectra_path, "JSON list of {t_ms, psd}");
    ingest_cmd->add_option("--psd-unit", psd_unit)->check(CLI::IsMember({"db", "linear"}))->capture_default_str();
    ingest_cmd->add_option("--events", events_path, "CSV t_ms,kind");
    ingest_cmd->add_option("--window-ms", window_ms)->capture_default_str()->check(CLI::PositiveNumber);
    ingest_cmd->add_option("--fft-size", fft_size)->capture_default_str();

    // annotate
    auto* annotate_cmd = app.add_subcommand("annotate", "Label a range of windows");
    std::string label;
    std::int64_t from_window = 0, to_window = 0;
    annotate_cmd->add_option("--session-id", common.session_id)->required();
    annotate_cmd->add_option("--label", label)->required();
    annotate_cmd->add_option("--from", from_window)->required();
    annotate_cmd->add_option("--to", to_window)->required();

    // pipeline
    auto* pipeline_cmd = app.add_subcommand("pipeline", "Features, embedding, clustering and correlation");
    std::string algorithm = "dbscan", embed = "tsne";
    std::optional<int> k;
    std::optional<double> eps;
    pipeline::PipelineConfig config;
    pipeline_cmd->add_option("--session-id", common.session_id)->required();
    pipeline_cmd->add_option("--algorithm", algorithm)->check(CLI::IsMember({"kmeans", "dbscan", "gmm"}))->capture_default_str();
    pipeline_cmd->add_option("--embed", embed)->check(CLI::IsMember({"tsne", "raw"}))->capture_default_str();
    pipeline_cmd->add_option("--seed", common.seed)->capture_default_str();
    pipeline_cmd->add_option("--k", k, "Cluster count for kmeans/gmm (default: DBSCAN count)");
    pipeline_cmd->add_option("--eps", eps, "DBSCAN radius (default: elbow of the k-distance curve)");
    pipeline_cmd->add_option("--min-pts", config.min_pts)->capture_default_str();
    pipeline_cmd->add_option("--perplexity", config.perplexity)->capture_default_str();
    pipeline_cmd->add_option("--n-iter", config.n_iter)->capture_default_str();
    std::string modality = "all";
    pipeline_cmd->add_option("--modality", modality, "Cluster on one modality block only")
        ->check(CLI::IsMember({"all", "power", "network", "emanation"}))
        ->capture_default_str();

    // collage / merge
    auto* collage_cmd = app.add_subcommand("collage", "Merge annotated states into named groups");
    std::string map_path;
    collage_cmd->add_option("--session-id", common.session_id)->required();
    collage_cmd->add_option("--map", map_path, "JSON {\"groups\":[{\"name\",\"members\"}]} or {name:[members]}")->required();
    auto* merge_cmd = app.add_subcommand("merge", "Union states entered by the same event kind");
    merge_cmd->add_option("--session-id", common.session_id)->required();

    // train / verify
    auto* train_cmd = app.add_subcommand("train", "Train the state classifier on the session's labels");
    train_cmd->add_option("--session-id", common.session_id)->required();
    train_cmd->add_option("--seed", common.seed, "Split seed")->capture_default_str();
    auto* verify_cmd = app.add_subcommand("verify", "Step-wise verification, one JSON line per window");
    std::string classifier_id;
    verify_cmd->add_option("--session-id", common.session_id)->required();
    verify_cmd->add_option("--classifier", classifier_id, "Session holding the classifier (default: same)");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "HTTP API");
    int port = 8080;
    std::string host = "0.0.0.0";
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--host", host)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        auto st = open_store(common);
        if (*synth_cmd) {
            const auto d = pick_device(device);
            const auto script = protocol_for(device, d, per_state, window_ms, common.seed);
            synth::SimOptions opts;
            opts.noise_scale = noise_scale;
            auto session = synth::simulate(d, script, window_ms, common.seed, opts);
            if (interactions) session = synth::per_interaction_labels(session);
            const std::string id = common.session_id.empty() ? session.session_id : common.session_id;
            ensure_session(st, id);
            st.put(id, session);
            if (!synth_out.empty()) write_file(synth_out, dump_session(st.load(id)));
            std::cout << json{{"session_id", id}, {"windows", session.windows.size()}, {"events", session.events.size()}}.dump()
                      << "\n";
        } else if (*ingest_cmd) {
            store::IngestRequest req;
            if (!power_path.empty()) req.power_csv = read_file(power_path);
            if (!network_path.empty()) req.network_csv = read_file(network_path);
            if (!iq_path.empty() || !iq_header_path.empty()) {
                if (iq_path.empty() || iq_header_path.empty()) {
                    throw Error("MissingInput", "ingest", "--iq and --iq-header go together");
                }
                req.iq_header_json = read_file(iq_header_path);
                req.iq_payload = read_file(iq_path);
            }
            if (!spectra_path.empty()) {
                for (const auto& s : json::parse(read_file(spectra_path))) {
                    req.spectra.push_back({s.at("t_ms").get<TimestampMs>(), s.at("psd").get<std::vector<double>>()});
                }
            }
            req.spectra_unit = psd_unit == "linear" ? PsdUnit::Linear : PsdUnit::Decibel;
            if (!events_path.empty()) req.events = store::parse_event_marks(read_file(events_path));
            req.window_ms = window_ms;
            req.fft_size = fft_size;
            auto session = store::ingest_traces(common.session_id, req);
            ensure_session(st, common.session_id);
            st.put(common.session_id, session);
            std::cout << json{{"session_id", common.session_id}, {"windows", session.windows.size()},
                              {"events", session.events.size()}}.dump()
                      << "\n";
        } else if (*annotate_cmd) {
            const auto s = st.mutate(common.session_id,
                                     [&](Session& s) { store::annotate(s, label, from_window, to_window); });
            std::cout << json{{"labels", session_to_json(s).at("labels")}}.dump() << "\n";
        } else if (*pipeline_cmd) {
            config.algorithm = cluster::parse_algorithm(algorithm);
            config.embed = pipeline::parse_embed(embed);
            config.seed = common.seed;
            config.k = k;
            config.eps = eps;
            config.modality = pipeline::parse_modality(modality);
            const auto result = st.run_pipeline(common.session_id, config);
            std::cout << json{{"k", result.clusters.k},
                              {"eps", result.eps ? json(*result.eps) : json(nullptr)},
                              {"artifacts", st.manifest(common.session_id).at("files")}}.dump(2)
                      << "\n";
        } else if (*collage_cmd) {
            const auto collage = fsm::collage_from_json(json::parse(read_file(map_path)));
            fsm::Fsm machine;
            st.mutate(common.session_id, [&](Session& s) {
                auto applied = fsm::apply_collage(fsm::build_fsm(s), s, collage);
                machine = std::move(applied.fsm);
                s = std::move(applied.session);
            });
            std::cout << fsm::export_fsm(machine).dump(2) << "\n";
        } else if (*merge_cmd) {
            fsm::MergeResult merged;
            st.mutate(common.session_id, [&](Session& s) {
                merged = fsm::merge_by_transition_event(fsm::build_fsm(s), s);
                s = merged.session;
            });
            std::cout << json{{"fsm", fsm::export_fsm(merged.fsm)}, {"relabel", merged.relabel}}.dump(2) << "\n";
        } else if (*train_cmd) {
            const auto model = st.train(common.session_id, common.seed);
            std::cout << cluster::confusion_table(model.holdout);
            std::cout << "holdout accuracy " << model.holdout.accuracy << ", precision " << model.holdout.precision
                      << ", recall " << model.holdout.recall << ", f1 " << model.holdout.f1 << "\n";
        } else if (*verify_cmd) {
            const auto session = st.load(common.session_id);
            const auto model = st.load_model(classifier_id.empty() ? common.session_id : classifier_id);
            std::size_t steps = 0, invalid = 0, unknown = 0;
            verify::stepwise_verify(model.classifier, model.fsm, session, [&](const verify::VerificationStep& step) {
                ++steps;
                invalid += step.transition_valid ? 0 : 1;
                unknown += step.predicted == verify::kUnknown ? 1 : 0;
                std::cout << verify::step_to_json(step).dump() << "\n";
            });
            std::cerr << steps << " steps, " << invalid << " invalid transitions, " << unknown << " unknown\n";
        } else if (*serve_cmd) {
            return server::serve(st, host, port);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.code() << " [" << e.stage() << "]: " << e.detail() << "\n";
        return e.kind() == ErrorKind::Io ? 2 : 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: SchemaViolation: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
