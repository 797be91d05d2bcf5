#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "statescope/trace.hpp"

namespace statescope::synth {

struct Harmonic {
    double freq_hz = 0.0;
    double psd_db = 0.0;
};

/// Gaussian emission model of one device state.
struct StateProfile {
    double power_mean_ma = 0.0;
    double power_std_ma = 0.0;
    double throughput_mean_bps = 0.0;  // bytes per second
    double throughput_std_bps = 0.0;
    std::vector<Harmonic> emanation_harmonics;
    double psd_noise_db = -95.0;
};

/// One-sided simulated spectrum: `bins` bins covering [0, sample_rate_hz / 2).
struct SpectrumLayout {
    double sample_rate_hz = 2.0e6;
    std::size_t bins = 128;

    double bin_hz() const { return sample_rate_hz / 2.0 / static_cast<double>(bins); }
    double nyquist_hz() const { return sample_rate_hz / 2.0; }
};

struct GroundTruthDevice {
    std::string name;
    std::map<std::string, StateProfile> states;
    std::map<std::pair<std::string, std::string>, std::string> transitions;  // (state, event) -> state
    std::string initial;
    SpectrumLayout spectrum;

    void validate() const;
    std::vector<std::string> events_from(const std::string& state) const;
};

struct ScriptStep {
    std::string event;
    std::int64_t dwell_ms = 0;
};

/// The device starts in its initial state for initial_dwell_ms, then each
/// step fires its event and dwells in the resulting state.
struct ScenarioScript {
    std::int64_t initial_dwell_ms = 0;
    std::vector<ScriptStep> steps;

    void validate() const;
};

struct SimOptions {
    double noise_scale = 1.0;  // multiplies every std, including spectral jitter
    std::int64_t power_period_ms = 10;
    std::int64_t network_period_ms = 100;
    double psd_jitter_db = 0.5;
};

/// Ground-truth-annotated session; a pure function of its arguments.
Session simulate(const GroundTruthDevice& device, const ScenarioScript& script, std::int64_t window_ms,
                 std::uint64_t seed, const SimOptions& options = {});

/// Replaces ground-truth annotations by one fresh human label per
/// interaction ("i0", "i1", ...), the way an explorer who cannot yet tell
/// states apart would annotate.
Session per_interaction_labels(const Session& session);

/// Odd harmonics of a square-wave clock at f, with the 1/(2k-1) amplitude
/// roll-off expressed in dB relative to the fundamental.
std::vector<Harmonic> square_wave_harmonics(double f_hz, int n_harmonics, double fundamental_db);

/// Five-state analog of an interactive voice assistant kit.
GroundTruthDevice voice_kit_fixture();
/// Three-state analog of an on-device vision kit; it never sends traffic.
GroundTruthDevice vision_kit_fixture();

/// Script giving every state of the matching fixture exactly
/// `windows_per_state` windows, spread over `visits` revisits where the
/// state graph allows it.
ScenarioScript voice_kit_protocol(int windows_per_state, std::int64_t window_ms, int visits = 10);
ScenarioScript vision_kit_protocol(int windows_per_state, std::int64_t window_ms, int visits = 10);

/// Random walk over the device graph with dwell drawn uniformly from
/// [min_windows, max_windows] windows.
ScenarioScript random_script(const GroundTruthDevice& device, int steps, int min_windows, int max_windows,
                             std::int64_t window_ms, std::uint64_t seed);

/// True when each event kind always leads to the same state, each
/// non-initial state is entered by exactly one event kind, and the initial
/// state is never re-entered.
bool is_event_deterministic(const GroundTruthDevice& device);

nlohmann::json device_to_json(const GroundTruthDevice& device);
GroundTruthDevice device_from_json(const nlohmann::json& doc);
nlohmann::json script_to_json(const ScenarioScript& script);
ScenarioScript script_from_json(const nlohmann::json& doc);

}  // namespace statescope::synth
