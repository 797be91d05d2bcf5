#include "statescope/trace.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "statescope/dsp.hpp"
#include "statescope/error.hpp"

namespace statescope {

namespace {

constexpr const char* kStage = "trace-model";
constexpr std::string_view kCsvHeader = "timestamp_ms,value";

std::string line_detail(std::size_t line_no, std::string_view what) {
    return "line " + std::to_string(line_no) + ": " + std::string(what);
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

/// Splits CSV text into (line number, timestamp field, value field) rows,
/// skipping the optional header line.
template <typename Fn>
void for_each_csv_row(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::size_t rows = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line_no == 1 && line == kCsvHeader) continue;
        const auto comma = line.find(',');
        if (line.empty() || comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
            throw Error("MalformedLine", kStage, line_detail(line_no, "expected `timestamp_ms,value`"));
        }
        fn(line_no, line.substr(0, comma), line.substr(comma + 1));
        ++rows;
    }
    if (rows == 0) throw Error("Empty", kStage, "trace contains no samples");
}

void check_monotonic(std::size_t line_no, bool has_prev, TimestampMs prev, TimestampMs t) {
    if (has_prev && t <= prev) {
        throw Error("NonMonotonicTimestamp", kStage,
                    line_detail(line_no, "timestamp " + std::to_string(t) + " does not exceed " + std::to_string(prev)));
    }
}

std::pair<TimestampMs, TimestampMs> iq_span(const IqTrace& iq) {
    const double duration_ms = static_cast<double>(iq.iq.size()) * 1000.0 / iq.sample_rate_hz;
    return {iq.t_start_ms, iq.t_start_ms + static_cast<TimestampMs>(std::ceil(duration_ms))};
}

}  // namespace

std::string_view to_string(LabelOrigin origin) {
    switch (origin) {
        case LabelOrigin::Human: return "human";
        case LabelOrigin::Merged: return "merged";
        case LabelOrigin::Collaged: return "collaged";
        case LabelOrigin::GroundTruth: return "ground_truth";
    }
    return "human";
}

LabelOrigin parse_origin(std::string_view text) {
    if (text == "human") return LabelOrigin::Human;
    if (text == "merged") return LabelOrigin::Merged;
    if (text == "collaged") return LabelOrigin::Collaged;
    if (text == "ground_truth") return LabelOrigin::GroundTruth;
    throw Error("SchemaViolation", kStage, "unknown label origin `" + std::string(text) + "`");
}

const MultiModalWindow* Session::find_window(std::int64_t window_id) const {
    auto idx = window_index(window_id);
    return idx ? &windows[*idx] : nullptr;
}

std::optional<std::size_t> Session::window_index(std::int64_t window_id) const {
    for (std::size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].window_id == window_id) return i;
    }
    return std::nullopt;
}

const StateLabel* Session::find_label(std::string_view name) const {
    for (const auto& l : labels) {
        if (l.name == name) return &l;
    }
    return nullptr;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

PowerTrace parse_power_trace(std::string_view text) {
    PowerTrace trace;
    for_each_csv_row(text, [&](std::size_t line_no, std::string_view ts, std::string_view val) {
        PowerSample s;
        if (!parse_number(ts, s.timestamp_ms) || !parse_number(val, s.current_ma) || !std::isfinite(s.current_ma) ||
            s.current_ma < 0.0) {
            throw Error("MalformedLine", kStage, line_detail(line_no, "expected integer timestamp and current >= 0"));
        }
        check_monotonic(line_no, !trace.samples.empty(), trace.samples.empty() ? 0 : trace.samples.back().timestamp_ms,
                        s.timestamp_ms);
        trace.samples.push_back(s);
    });
    return trace;
}

NetworkTrace parse_network_trace(std::string_view text) {
    NetworkTrace trace;
    for_each_csv_row(text, [&](std::size_t line_no, std::string_view ts, std::string_view val) {
        NetworkSample s;
        if (!parse_number(ts, s.timestamp_ms) || !parse_number(val, s.bytes)) {
            throw Error("MalformedLine", kStage, line_detail(line_no, "expected integer timestamp and byte count"));
        }
        check_monotonic(line_no, !trace.samples.empty(), trace.samples.empty() ? 0 : trace.samples.back().timestamp_ms,
                        s.timestamp_ms);
        trace.samples.push_back(s);
    });
    return trace;
}

std::string serialize_power_trace(const PowerTrace& trace) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& s : trace.samples) {
        out += std::to_string(s.timestamp_ms);
        out += ',';
        out += format_double(s.current_ma);
        out += '\n';
    }
    return out;
}

std::string serialize_network_trace(const NetworkTrace& trace) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& s : trace.samples) {
        out += std::to_string(s.timestamp_ms);
        out += ',';
        out += std::to_string(s.bytes);
        out += '\n';
    }
    return out;
}

IqTrace parse_iq_trace(std::string_view header_json, std::span<const std::byte> payload) {
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_json);
    } catch (const nlohmann::json::exception& e) {
        throw Error("HeaderMismatch", kStage, std::string("header is not JSON: ") + e.what());
    }
    IqTrace trace;
    std::uint64_t count = 0;
    try {
        trace.sample_rate_hz = header.at("sample_rate_hz").get<double>();
        trace.center_freq_hz = header.at("center_freq_hz").get<double>();
        count = header.at("count").get<std::uint64_t>();
        trace.t_start_ms = header.value("t_start_ms", TimestampMs{0});
    } catch (const nlohmann::json::exception& e) {
        throw Error("HeaderMismatch", kStage, std::string("header field: ") + e.what());
    }
    if (!(trace.sample_rate_hz > 0.0)) throw Error("HeaderMismatch", kStage, "sample_rate_hz must be positive");
    if (count < 1) throw Error("HeaderMismatch", kStage, "count must be at least 1");

    const std::uint64_t expected = count * 8;
    if (payload.size() < expected) {
        throw Error("TruncatedPayload", kStage,
                    "payload has " + std::to_string(payload.size()) + " bytes, header declares " +
                        std::to_string(expected));
    }
    if (payload.size() > expected) {
        throw Error("HeaderMismatch", kStage,
                    "payload has " + std::to_string(payload.size()) + " bytes, header declares " +
                        std::to_string(expected));
    }
    auto read_f32 = [&](std::size_t offset) {
        std::uint32_t bits = 0;
        for (int b = 3; b >= 0; --b) bits = (bits << 8) | std::to_integer<std::uint32_t>(payload[offset + b]);
        return static_cast<double>(std::bit_cast<float>(bits));
    };
    trace.iq.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) trace.iq.emplace_back(read_f32(i * 8), read_f32(i * 8 + 4));
    return trace;
}

std::vector<std::byte> serialize_iq_payload(const IqTrace& trace) {
    std::vector<std::byte> out;
    out.reserve(trace.iq.size() * 8);
    auto put = [&](double v) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::byte>((bits >> (8 * b)) & 0xFFu));
    };
    for (const auto& c : trace.iq) {
        put(c.real());
        put(c.imag());
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("FileNotReadable", "io", path, ErrorKind::Io);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("FileNotWritable", "io", path, ErrorKind::Io);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("FileNotWritable", "io", path, ErrorKind::Io);
}

std::vector<MultiModalWindow> window_session(const PowerTrace& power, const NetworkTrace& network,
                                             const EmanationInput& emanation,
                                             std::span<const TimestampMs> event_times, TimestampMs window_ms) {
    if (window_ms <= 0) throw Error("InvalidWindow", kStage, "window_ms must be positive");

    std::vector<std::pair<TimestampMs, TimestampMs>> spans;
    if (!power.samples.empty()) spans.emplace_back(power.samples.front().timestamp_ms, power.samples.back().timestamp_ms + 1);
    if (!network.samples.empty()) {
        spans.emplace_back(network.samples.front().timestamp_ms, network.samples.back().timestamp_ms + 1);
    }
    if (emanation.iq && !emanation.iq->iq.empty()) spans.push_back(iq_span(*emanation.iq));
    if (!emanation.spectra.empty()) spans.emplace_back(emanation.spectra.front().t_ms, emanation.spectra.back().t_ms + 1);
    if (spans.empty()) throw Error("NoOverlap", kStage, "no stream carries any samples");

    TimestampMs start = spans.front().first;
    TimestampMs end = spans.front().second;
    for (const auto& [a, b] : spans) {
        start = std::max(start, a);
        end = std::min(end, b);
    }
    if (start >= end) throw Error("NoOverlap", kStage, "streams share no time range");

    std::vector<TimestampMs> cuts{start};
    std::vector<TimestampMs> events(event_times.begin(), event_times.end());
    std::sort(events.begin(), events.end());
    for (TimestampMs t : events) {
        if (t > start && t < end && t != cuts.back()) cuts.push_back(t);
    }
    cuts.push_back(end);

    std::vector<std::pair<TimestampMs, TimestampMs>> bounds;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        for (TimestampMs a = cuts[s]; a < cuts[s + 1]; a += window_ms) bounds.emplace_back(a, std::min(a + window_ms, cuts[s + 1]));
    }

    std::vector<MultiModalWindow> windows;
    windows.reserve(bounds.size());
    std::size_t pi = 0;
    std::size_t ni = 0;
    std::size_t si = 0;
    for (std::size_t w = 0; w < bounds.size(); ++w) {
        const auto [a, b] = bounds[w];
        MultiModalWindow win;
        win.window_id = static_cast<std::int64_t>(w);
        win.t_start_ms = a;
        win.t_end_ms = b;
        while (pi < power.samples.size() && power.samples[pi].timestamp_ms < a) ++pi;
        for (; pi < power.samples.size() && power.samples[pi].timestamp_ms < b; ++pi) {
            win.power.push_back(power.samples[pi].current_ma);
        }
        while (ni < network.samples.size() && network.samples[ni].timestamp_ms < a) ++ni;
        for (; ni < network.samples.size() && network.samples[ni].timestamp_ms < b; ++ni) {
            win.network.push_back(static_cast<double>(network.samples[ni].bytes));
        }
        if (emanation.iq && !emanation.iq->iq.empty()) {
            const auto& iq = *emanation.iq;
            const double per_ms = iq.sample_rate_hz / 1000.0;
            auto index_at = [&](TimestampMs t) {
                const double idx = std::ceil(static_cast<double>(t - iq.t_start_ms) * per_ms);
                return static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(iq.iq.size())));
            };
            const std::size_t lo = index_at(a);
            const std::size_t hi = index_at(b);
            if (hi > lo) {
                auto slice = std::span<const dsp::Complex>(iq.iq).subspan(lo, hi - lo);
                win.spectrum_psd = dsp::to_db(dsp::averaged_psd(slice, iq.sample_rate_hz, emanation.fft_size));
            }
        } else if (!emanation.spectra.empty()) {
            while (si < emanation.spectra.size() && emanation.spectra[si].t_ms < a) ++si;
            std::size_t frames = 0;
            for (; si < emanation.spectra.size() && emanation.spectra[si].t_ms < b; ++si) {
                const auto& frame = emanation.spectra[si].psd;
                if (frames == 0) {
                    win.spectrum_psd.assign(frame.size(), 0.0);
                } else if (frame.size() != win.spectrum_psd.size()) {
                    throw Error("SpectrumLengthMismatch", kStage, "spectrum frames differ in length");
                }
                for (std::size_t k = 0; k < frame.size(); ++k) win.spectrum_psd[k] += frame[k];
                ++frames;
            }
            for (auto& v : win.spectrum_psd) v /= static_cast<double>(std::max<std::size_t>(frames, 1));
        }
        windows.push_back(std::move(win));
    }
    return windows;
}

std::vector<TransitionEvent> bind_events(std::span<const MultiModalWindow> windows, std::span<const EventMark> marks) {
    std::vector<EventMark> sorted(marks.begin(), marks.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.t_ms < b.t_ms; });
    std::vector<TransitionEvent> out;
    for (const auto& m : sorted) {
        auto it = std::find_if(windows.begin(), windows.end(), [&](const auto& w) { return w.t_start_ms == m.t_ms; });
        if (it == windows.begin() || it == windows.end()) {
            throw Error("EventOutOfRange", kStage,
                        "event `" + m.kind + "` at " + std::to_string(m.t_ms) + " ms is not an interior window boundary");
        }
        TransitionEvent e;
        e.event_id = static_cast<std::int64_t>(out.size());
        e.kind = m.kind;
        e.t_ms = m.t_ms;
        e.from_window = std::prev(it)->window_id;
        e.to_window = it->window_id;
        out.push_back(std::move(e));
    }
    return out;
}

void validate_session(const Session& s) {
    std::set<std::string> names;
    for (const auto& l : s.labels) {
        if (l.name.empty()) throw Error("SchemaViolation", kStage, "empty label name");
        if (!names.insert(l.name).second) throw Error("DuplicateLabel", kStage, "label `" + l.name + "` repeated");
    }
    std::set<std::int64_t> ids;
    for (std::size_t i = 0; i < s.windows.size(); ++i) {
        const auto& w = s.windows[i];
        const std::string where = "window " + std::to_string(w.window_id);
        if (!ids.insert(w.window_id).second) throw Error("DuplicateWindow", kStage, where + " repeated");
        if (w.t_start_ms >= w.t_end_ms) throw Error("InvalidWindow", kStage, where + " has t_start >= t_end");
        if (i > 0 && w.t_start_ms <= s.windows[i - 1].t_start_ms) {
            throw Error("WindowOrder", kStage, where + " is not ordered by start time");
        }
        if (w.power.empty() && w.network.empty() && w.spectrum_psd.empty() && w.emanation.empty()) {
            throw Error("InvalidWindow", kStage, where + " has no samples");
        }
        if (!std::all_of(w.spectrum_psd.begin(), w.spectrum_psd.end(), [](double v) { return std::isfinite(v); })) {
            throw Error("InvalidWindow", kStage, where + " has a non-finite spectrum value");
        }
        if (w.annotation && !names.contains(*w.annotation)) {
            throw Error("UnknownLabel", kStage, where + " annotated with undeclared label `" + *w.annotation + "`");
        }
    }
    for (const auto& e : s.events) {
        const auto from = s.window_index(e.from_window);
        const auto to = s.window_index(e.to_window);
        if (!from || !to) {
            throw Error("UnknownWindow", kStage, "event " + std::to_string(e.event_id) + " references a missing window");
        }
        if (*from >= *to) {
            throw Error("EventOrder", kStage, "event " + std::to_string(e.event_id) + " goes backwards in time");
        }
    }
}

nlohmann::json session_to_json(const Session& s) {
    using nlohmann::json;
    json windows = json::array();
    for (const auto& w : s.windows) {
        json jw = {{"window_id", w.window_id}, {"t_start_ms", w.t_start_ms}, {"t_end_ms", w.t_end_ms},
                   {"power", w.power},         {"network", w.network},       {"spectrum_psd", w.spectrum_psd}};
        if (!w.emanation.empty()) jw["emanation"] = w.emanation;
        jw["annotation"] = w.annotation ? json(*w.annotation) : json(nullptr);
        jw["cluster"] = w.cluster ? json(*w.cluster) : json(nullptr);
        windows.push_back(std::move(jw));
    }
    json events = json::array();
    for (const auto& e : s.events) {
        events.push_back({{"event_id", e.event_id}, {"kind", e.kind}, {"t_ms", e.t_ms},
                          {"from_window", e.from_window}, {"to_window", e.to_window}});
    }
    json labels = json::array();
    for (const auto& l : s.labels) labels.push_back({{"name", l.name}, {"origin", to_string(l.origin)}});
    return {{"schema", 1},
            {"session_id", s.session_id},
            {"psd_unit", s.psd_unit == PsdUnit::Decibel ? "db" : "linear"},
            {"windows", std::move(windows)},
            {"events", std::move(events)},
            {"labels", std::move(labels)}};
}

Session session_from_json(const nlohmann::json& doc) {
    Session s;
    try {
        if (doc.at("schema").get<int>() != 1) throw Error("SchemaViolation", kStage, "unsupported session schema");
        s.session_id = doc.at("session_id").get<std::string>();
        const auto unit = doc.value("psd_unit", std::string("db"));
        if (unit != "db" && unit != "linear") throw Error("SchemaViolation", kStage, "psd_unit must be db or linear");
        s.psd_unit = unit == "db" ? PsdUnit::Decibel : PsdUnit::Linear;
        for (const auto& jw : doc.at("windows")) {
            MultiModalWindow w;
            w.window_id = jw.at("window_id").get<std::int64_t>();
            w.t_start_ms = jw.at("t_start_ms").get<TimestampMs>();
            w.t_end_ms = jw.at("t_end_ms").get<TimestampMs>();
            w.power = jw.value("power", std::vector<double>{});
            w.network = jw.value("network", std::vector<double>{});
            w.spectrum_psd = jw.value("spectrum_psd", std::vector<double>{});
            w.emanation = jw.value("emanation", std::vector<double>{});
            if (jw.contains("annotation") && !jw["annotation"].is_null()) w.annotation = jw["annotation"].get<std::string>();
            if (jw.contains("cluster") && !jw["cluster"].is_null()) w.cluster = jw["cluster"].get<int>();
            s.windows.push_back(std::move(w));
        }
        for (const auto& je : doc.value("events", nlohmann::json::array())) {
            s.events.push_back(TransitionEvent{je.at("event_id").get<std::int64_t>(), je.at("kind").get<std::string>(),
                                               je.at("t_ms").get<TimestampMs>(), je.at("from_window").get<std::int64_t>(),
                                               je.at("to_window").get<std::int64_t>()});
        }
        for (const auto& jl : doc.value("labels", nlohmann::json::array())) {
            s.labels.push_back(StateLabel{jl.at("name").get<std::string>(), parse_origin(jl.at("origin").get<std::string>())});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("SchemaViolation", kStage, e.what());
    }
    validate_session(s);
    return s;
}

std::string dump_session(const Session& session) { return session_to_json(session).dump() + "\n"; }

const StateLabel& ensure_label(Session& session, const std::string& name, LabelOrigin origin) {
    if (name.empty()) throw Error("SchemaViolation", kStage, "empty label name");
    for (const auto& l : session.labels) {
        if (l.name == name) return l;
    }
    session.labels.push_back(StateLabel{name, origin});
    return session.labels.back();
}

void prune_labels(Session& session) {
    std::set<std::string> used;
    for (const auto& w : session.windows) {
        if (w.annotation) used.insert(*w.annotation);
    }
    std::erase_if(session.labels, [&](const StateLabel& l) { return !used.contains(l.name); });
}

}  // namespace statescope
