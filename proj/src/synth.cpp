#include "statescope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "statescope/error.hpp"

namespace statescope::synth {

namespace {

constexpr const char* kStage = "synth-device";

std::size_t harmonic_bin(const SpectrumLayout& layout, double freq_hz) {
    return static_cast<std::size_t>(std::lround(freq_hz / layout.bin_hz()));
}

void require(bool ok, const std::string& code, const std::string& detail) {
    if (!ok) throw Error(code, kStage, detail);
}

}  // namespace

void GroundTruthDevice::validate() const {
    require(!states.empty(), "InvalidDevice", "device has no states");
    require(states.contains(initial), "InvalidDevice", "initial state `" + initial + "` is not defined");
    require(spectrum.sample_rate_hz > 0.0 && spectrum.bins > 0, "InvalidDevice", "spectrum layout must be positive");
    for (const auto& [name, p] : states) {
        require(!name.empty(), "InvalidDevice", "empty state name");
        require(p.power_std_ma >= 0.0 && p.throughput_std_bps >= 0.0, "InvalidDevice",
                "state `" + name + "` has a negative std");
        std::set<double> freqs;
        for (const auto& h : p.emanation_harmonics) {
            require(h.freq_hz >= 0.0 && h.freq_hz < spectrum.nyquist_hz(), "InvalidDevice",
                    "state `" + name + "` harmonic at " + std::to_string(h.freq_hz) + " Hz is outside [0, Nyquist)");
            require(freqs.insert(h.freq_hz).second, "InvalidDevice",
                    "state `" + name + "` repeats harmonic " + std::to_string(h.freq_hz));
        }
    }
    for (const auto& [key, target] : transitions) {
        require(states.contains(key.first), "InvalidDevice", "transition from unknown state `" + key.first + "`");
        require(states.contains(target), "InvalidDevice", "transition to unknown state `" + target + "`");
    }
}

std::vector<std::string> GroundTruthDevice::events_from(const std::string& state) const {
    std::vector<std::string> out;
    for (const auto& [key, target] : transitions) {
        if (key.first == state) out.push_back(key.second);
    }
    return out;
}

void ScenarioScript::validate() const {
    require(initial_dwell_ms > 0, "InvalidScript", "initial_dwell_ms must be positive");
    for (const auto& s : steps) {
        require(s.dwell_ms > 0, "InvalidScript", "step `" + s.event + "` has non-positive dwell");
    }
}

Session simulate(const GroundTruthDevice& device, const ScenarioScript& script, std::int64_t window_ms,
                 std::uint64_t seed, const SimOptions& options) {
    device.validate();
    script.validate();
    require(window_ms > 0, "InvalidWindow", "window_ms must be positive");
    require(options.power_period_ms > 0 && options.network_period_ms > 0, "InvalidOptions",
            "sampling periods must be positive");
    require(options.noise_scale >= 0.0, "InvalidOptions", "noise_scale must be non-negative");

    // Resolve the state sequence first so undefined transitions fail before any sampling.
    std::vector<std::pair<std::string, std::int64_t>> dwells{{device.initial, script.initial_dwell_ms}};
    for (const auto& step : script.steps) {
        const auto it = device.transitions.find({dwells.back().first, step.event});
        if (it == device.transitions.end()) {
            throw Error("UndefinedTransition", kStage,
                        "event `" + step.event + "` is not defined in state `" + dwells.back().first + "`");
        }
        dwells.emplace_back(it->second, step.dwell_ms);
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double scale = options.noise_scale;
    const auto& layout = device.spectrum;

    Session session;
    session.session_id = "synth-" + device.name + "-" + std::to_string(seed);
    session.psd_unit = PsdUnit::Decibel;

    std::int64_t t = 0;
    for (std::size_t d = 0; d < dwells.size(); ++d) {
        const auto& [state, dwell] = dwells[d];
        const StateProfile& prof = device.states.at(state);
        ensure_label(session, state, LabelOrigin::GroundTruth);
        if (d > 0) {
            TransitionEvent e;
            e.event_id = static_cast<std::int64_t>(session.events.size());
            e.kind = script.steps[d - 1].event;
            e.t_ms = t;
            e.from_window = session.windows.back().window_id;
            e.to_window = static_cast<std::int64_t>(session.windows.size());
            session.events.push_back(std::move(e));
        }
        const std::int64_t dwell_end = t + dwell;
        for (std::int64_t a = t; a < dwell_end; a += window_ms) {
            MultiModalWindow w;
            w.window_id = static_cast<std::int64_t>(session.windows.size());
            w.t_start_ms = a;
            w.t_end_ms = std::min(a + window_ms, dwell_end);
            w.annotation = state;
            const std::int64_t len = w.t_end_ms - w.t_start_ms;

            const std::int64_t n_power = (len + options.power_period_ms - 1) / options.power_period_ms;
            w.power.reserve(static_cast<std::size_t>(n_power));
            for (std::int64_t i = 0; i < n_power; ++i) {
                w.power.push_back(std::max(0.0, prof.power_mean_ma + prof.power_std_ma * scale * gauss(rng)));
            }

            const double per_interval = static_cast<double>(options.network_period_ms) / 1000.0;
            const std::int64_t n_net = (len + options.network_period_ms - 1) / options.network_period_ms;
            w.network.reserve(static_cast<std::size_t>(n_net));
            for (std::int64_t i = 0; i < n_net; ++i) {
                const double bytes =
                    (prof.throughput_mean_bps + prof.throughput_std_bps * scale * gauss(rng)) * per_interval;
                w.network.push_back(std::round(std::max(0.0, bytes)));
            }

            w.spectrum_psd.resize(layout.bins);
            for (auto& v : w.spectrum_psd) v = prof.psd_noise_db + options.psd_jitter_db * scale * gauss(rng);
            for (const auto& h : prof.emanation_harmonics) {
                const std::size_t bin = harmonic_bin(layout, h.freq_hz);
                if (bin >= layout.bins) continue;
                w.spectrum_psd[bin] = h.psd_db + options.psd_jitter_db * scale * gauss(rng);
            }
            session.windows.push_back(std::move(w));
        }
        t = dwell_end;
    }
    validate_session(session);
    return session;
}

Session per_interaction_labels(const Session& session) {
    Session out = session;
    out.labels.clear();
    std::set<std::int64_t> starts;
    for (const auto& e : session.events) starts.insert(e.to_window);
    int interaction = -1;
    for (auto& w : out.windows) {
        if (interaction < 0 || starts.contains(w.window_id)) ++interaction;
        const std::string name = "i" + std::to_string(interaction);
        w.annotation = name;
        ensure_label(out, name, LabelOrigin::Human);
    }
    return out;
}

std::vector<Harmonic> square_wave_harmonics(double f_hz, int n_harmonics, double fundamental_db) {
    std::vector<Harmonic> out;
    for (int k = 1; k <= n_harmonics; ++k) {
        const double odd = 2.0 * k - 1.0;
        out.push_back(Harmonic{odd * f_hz, fundamental_db - 20.0 * std::log10(odd)});
    }
    return out;
}

// Profile values below are chosen for this simulator only. What matters is
// which modalities separate which states, not the absolute numbers.

GroundTruthDevice voice_kit_fixture() {
    GroundTruthDevice d;
    d.name = "voice-kit";
    d.spectrum = SpectrumLayout{2.0e6, 128};
    const double bin = d.spectrum.bin_hz();
    auto concat = [](std::vector<Harmonic> a, const std::vector<Harmonic>& b) {
        a.insert(a.end(), b.begin(), b.end());
        return a;
    };

    d.states["power_off"] = StateProfile{2.0, 0.5, 0.0, 0.0, {}, -95.0};
    d.states["internet_access"] = StateProfile{310.0, 8.0, 24000.0, 4000.0, square_wave_harmonics(8 * bin, 4, -60.0), -95.0};
    d.states["listening"] = StateProfile{260.0, 8.0, 600.0, 200.0, square_wave_harmonics(8 * bin, 1, -72.0), -95.0};
    d.states["speech_processing"] =
        StateProfile{420.0, 12.0, 1500.0, 400.0, square_wave_harmonics(12 * bin, 4, -55.0), -95.0};
    d.states["responding"] = StateProfile{380.0, 12.0, 18000.0, 4000.0,
                                          concat(square_wave_harmonics(8 * bin, 3, -66.0),
                                                 square_wave_harmonics(12 * bin, 2, -64.0)),
                                          -95.0};
    d.initial = "power_off";
    d.transitions[{"power_off", "power_on"}] = "internet_access";
    d.transitions[{"internet_access", "wait"}] = "listening";
    d.transitions[{"listening", "ask"}] = "speech_processing";
    d.transitions[{"speech_processing", "reply"}] = "responding";
    d.transitions[{"responding", "wait"}] = "listening";
    d.validate();
    return d;
}

GroundTruthDevice vision_kit_fixture() {
    GroundTruthDevice d;
    d.name = "vision-kit";
    d.spectrum = SpectrumLayout{2.0e6, 128};
    const double bin = d.spectrum.bin_hz();
    // Power tells "off" from "on"; the accelerator clock tells "face" from
    // "no face". Neither alone resolves all three states.
    d.states["power_off"] = StateProfile{3.0, 0.5, 0.0, 0.0, {}, -95.0};
    d.states["no_face"] = StateProfile{950.0, 25.0, 0.0, 0.0, {}, -95.0};
    d.states["face_detected"] = StateProfile{960.0, 25.0, 0.0, 0.0, square_wave_harmonics(10 * bin, 3, -58.0), -95.0};
    d.initial = "power_off";
    d.transitions[{"power_off", "power_on"}] = "no_face";
    d.transitions[{"no_face", "face_appears"}] = "face_detected";
    d.transitions[{"face_detected", "face_leaves"}] = "no_face";
    d.validate();
    return d;
}

namespace {

std::vector<int> split_visits(int total, int visits) {
    std::vector<int> out(static_cast<std::size_t>(visits), total / visits);
    for (int i = 0; i < total % visits; ++i) ++out[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace

ScenarioScript voice_kit_protocol(int windows_per_state, std::int64_t window_ms, int visits) {
    require(windows_per_state >= visits && visits >= 1, "InvalidScript", "need at least one window per visit");
    ScenarioScript s;
    s.initial_dwell_ms = windows_per_state * window_ms;
    s.steps.push_back({"power_on", windows_per_state * window_ms});
    const auto per_visit = split_visits(windows_per_state, visits);
    for (int v : per_visit) {
        s.steps.push_back({"wait", v * window_ms});
        s.steps.push_back({"ask", v * window_ms});
        s.steps.push_back({"reply", v * window_ms});
    }
    return s;
}

ScenarioScript vision_kit_protocol(int windows_per_state, std::int64_t window_ms, int visits) {
    require(windows_per_state >= visits && visits >= 1, "InvalidScript", "need at least one window per visit");
    ScenarioScript s;
    s.initial_dwell_ms = windows_per_state * window_ms;
    const auto per_visit = split_visits(windows_per_state, visits);
    for (std::size_t i = 0; i < per_visit.size(); ++i) {
        s.steps.push_back({i == 0 ? "power_on" : "face_leaves", per_visit[i] * window_ms});
        s.steps.push_back({"face_appears", per_visit[i] * window_ms});
    }
    return s;
}

ScenarioScript random_script(const GroundTruthDevice& device, int steps, int min_windows, int max_windows,
                             std::int64_t window_ms, std::uint64_t seed) {
    device.validate();
    require(min_windows >= 1 && max_windows >= min_windows, "InvalidScript", "bad dwell window range");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dwell(min_windows, max_windows);
    ScenarioScript s;
    s.initial_dwell_ms = dwell(rng) * window_ms;
    std::string state = device.initial;
    for (int i = 0; i < steps; ++i) {
        const auto options = device.events_from(state);
        if (options.empty()) break;
        std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
        const auto& event = options[pick(rng)];
        s.steps.push_back({event, dwell(rng) * window_ms});
        state = device.transitions.at({state, event});
    }
    return s;
}

bool is_event_deterministic(const GroundTruthDevice& device) {
    std::map<std::string, std::string> target_of_kind;
    std::map<std::string, std::set<std::string>> kinds_into;
    for (const auto& [key, target] : device.transitions) {
        auto [it, fresh] = target_of_kind.emplace(key.second, target);
        if (!fresh && it->second != target) return false;
        kinds_into[target].insert(key.second);
    }
    if (kinds_into.contains(device.initial)) return false;
    return std::all_of(kinds_into.begin(), kinds_into.end(), [](const auto& kv) { return kv.second.size() == 1; });
}

nlohmann::json device_to_json(const GroundTruthDevice& device) {
    using nlohmann::json;
    json states = json::object();
    for (const auto& [name, p] : device.states) {
        json harmonics = json::array();
        for (const auto& h : p.emanation_harmonics) harmonics.push_back({{"freq_hz", h.freq_hz}, {"psd_db", h.psd_db}});
        states[name] = {{"power_mean_ma", p.power_mean_ma},
                        {"power_std_ma", p.power_std_ma},
                        {"throughput_mean_bps", p.throughput_mean_bps},
                        {"throughput_std_bps", p.throughput_std_bps},
                        {"emanation_harmonics", harmonics},
                        {"psd_noise_db", p.psd_noise_db}};
    }
    json transitions = json::array();
    for (const auto& [key, target] : device.transitions) {
        transitions.push_back({{"from", key.first}, {"event", key.second}, {"to", target}});
    }
    return {{"name", device.name},
            {"initial", device.initial},
            {"spectrum", {{"sample_rate_hz", device.spectrum.sample_rate_hz}, {"bins", device.spectrum.bins}}},
            {"states", states},
            {"transitions", transitions}};
}

GroundTruthDevice device_from_json(const nlohmann::json& doc) {
    GroundTruthDevice d;
    try {
        d.name = doc.value("name", std::string("device"));
        d.initial = doc.at("initial").get<std::string>();
        if (doc.contains("spectrum")) {
            d.spectrum.sample_rate_hz = doc["spectrum"].at("sample_rate_hz").get<double>();
            d.spectrum.bins = doc["spectrum"].at("bins").get<std::size_t>();
        }
        for (const auto& [name, js] : doc.at("states").items()) {
            StateProfile p;
            p.power_mean_ma = js.value("power_mean_ma", 0.0);
            p.power_std_ma = js.value("power_std_ma", 0.0);
            p.throughput_mean_bps = js.value("throughput_mean_bps", 0.0);
            p.throughput_std_bps = js.value("throughput_std_bps", 0.0);
            p.psd_noise_db = js.value("psd_noise_db", -95.0);
            for (const auto& h : js.value("emanation_harmonics", nlohmann::json::array())) {
                p.emanation_harmonics.push_back({h.at("freq_hz").get<double>(), h.at("psd_db").get<double>()});
            }
            d.states[name] = std::move(p);
        }
        for (const auto& jt : doc.value("transitions", nlohmann::json::array())) {
            d.transitions[{jt.at("from").get<std::string>(), jt.at("event").get<std::string>()}] =
                jt.at("to").get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaViolation", kStage, e.what());
    }
    d.validate();
    return d;
}

nlohmann::json script_to_json(const ScenarioScript& script) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : script.steps) steps.push_back({{"event", s.event}, {"dwell_ms", s.dwell_ms}});
    return {{"initial_dwell_ms", script.initial_dwell_ms}, {"steps", steps}};
}

ScenarioScript script_from_json(const nlohmann::json& doc) {
    ScenarioScript s;
    try {
        s.initial_dwell_ms = doc.at("initial_dwell_ms").get<std::int64_t>();
        for (const auto& js : doc.at("steps")) {
            s.steps.push_back({js.at("event").get<std::string>(), js.at("dwell_ms").get<std::int64_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaViolation", kStage, e.what());
    }
    s.validate();
    return s;
}

}  // namespace statescope::synth
