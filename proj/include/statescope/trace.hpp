#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace statescope {

using TimestampMs = std::int64_t;

struct PowerSample {
    TimestampMs timestamp_ms = 0;
    double current_ma = 0.0;
    bool operator==(const PowerSample&) const = default;
};

struct NetworkSample {
    TimestampMs timestamp_ms = 0;
    std::uint64_t bytes = 0;
    bool operator==(const NetworkSample&) const = default;
};

struct PowerTrace {
    std::vector<PowerSample> samples;
    bool operator==(const PowerTrace&) const = default;
};

struct NetworkTrace {
    std::vector<NetworkSample> samples;
    bool operator==(const NetworkTrace&) const = default;
};

struct IqTrace {
    double sample_rate_hz = 0.0;
    double center_freq_hz = 0.0;
    TimestampMs t_start_ms = 0;
    std::vector<std::complex<double>> iq;
};

enum class LabelOrigin { Human, Merged, Collaged, GroundTruth };

std::string_view to_string(LabelOrigin origin);
LabelOrigin parse_origin(std::string_view text);

struct StateLabel {
    std::string name;
    LabelOrigin origin = LabelOrigin::Human;
    bool operator==(const StateLabel&) const = default;
};

enum class PsdUnit { Linear, Decibel };

struct MultiModalWindow {
    std::int64_t window_id = 0;
    TimestampMs t_start_ms = 0;
    TimestampMs t_end_ms = 0;
    std::vector<double> power;         // mA
    std::vector<double> network;       // bytes per sampling interval
    std::vector<double> spectrum_psd;  // unit declared by the owning session
    std::vector<double> emanation;     // psd at reference peak bins, filled by dsp
    std::optional<std::string> annotation;
    std::optional<int> cluster;
    bool operator==(const MultiModalWindow&) const = default;
};

struct TransitionEvent {
    std::int64_t event_id = 0;
    std::string kind;
    TimestampMs t_ms = 0;
    std::int64_t from_window = 0;
    std::int64_t to_window = 0;
    bool operator==(const TransitionEvent&) const = default;
};

struct Session {
    std::string session_id;
    PsdUnit psd_unit = PsdUnit::Decibel;
    std::vector<MultiModalWindow> windows;
    std::vector<TransitionEvent> events;
    std::vector<StateLabel> labels;
    bool operator==(const Session&) const = default;

    const MultiModalWindow* find_window(std::int64_t window_id) const;
    std::optional<std::size_t> window_index(std::int64_t window_id) const;
    const StateLabel* find_label(std::string_view name) const;
};

// --- trace files -----------------------------------------------------------

PowerTrace parse_power_trace(std::string_view text);
NetworkTrace parse_network_trace(std::string_view text);
std::string serialize_power_trace(const PowerTrace& trace);
std::string serialize_network_trace(const NetworkTrace& trace);

/// `header_json` carries sample_rate_hz, center_freq_hz, count and an
/// optional t_start_ms; `payload` is interleaved little-endian float32 I/Q.
IqTrace parse_iq_trace(std::string_view header_json, std::span<const std::byte> payload);
std::vector<std::byte> serialize_iq_payload(const IqTrace& trace);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

// --- windowing -------------------------------------------------------------

struct EventMark {
    TimestampMs t_ms = 0;
    std::string kind;
};

/// Precomputed spectrum frame stamped with its capture time.
struct TimedSpectrum {
    TimestampMs t_ms = 0;
    std::vector<double> psd;
};

struct EmanationInput {
    std::optional<IqTrace> iq;
    std::vector<TimedSpectrum> spectra;
    std::size_t fft_size = 256;  // per-window IQ is cut into frames of this size
};

/// Splits the common time range of all non-empty streams into windows of
/// `window_ms`; every event time inside the range restarts the tiling.
std::vector<MultiModalWindow> window_session(const PowerTrace& power, const NetworkTrace& network,
                                             const EmanationInput& emanation,
                                             std::span<const TimestampMs> event_times,
                                             TimestampMs window_ms);

/// Maps event marks onto the window boundaries produced by window_session.
std::vector<TransitionEvent> bind_events(std::span<const MultiModalWindow> windows,
                                         std::span<const EventMark> marks);

// --- session ---------------------------------------------------------------

void validate_session(const Session& session);

nlohmann::json session_to_json(const Session& session);
Session session_from_json(const nlohmann::json& doc);
std::string dump_session(const Session& session);

/// Adds `name` to the label set if absent; returns the stored label.
const StateLabel& ensure_label(Session& session, const std::string& name, LabelOrigin origin);

/// Drops labels no longer referenced by any window annotation.
void prune_labels(Session& session);

/// Shortest round-trip text form of a double, as used in every CSV we write.
std::string format_double(double value);

}  // namespace statescope
