#include "statescope/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "statescope/error.hpp"
#include "stats.hpp"

namespace statescope::features {

namespace {

constexpr const char* kStage = "features";

}  // namespace

StatBlock stat_features(std::span<const double> series) {
    if (series.empty()) throw Error("Empty", kStage, "statistics of an empty series");
    const auto n = static_cast<double>(series.size());

    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (double x : series) {
        abs_sum += std::abs(x);
        sq_sum += x * x;
    }
    const double mav = abs_sum / n;
    const double energy = sq_sum / n;
    const double rms = std::sqrt(energy);

    const bool constant = std::all_of(series.begin(), series.end(), [&](double x) { return x == series[0]; });
    if (constant) return {mav, 0.0, rms, 0.0, 0.0, 0.0, 0.0, 0.0, energy};

    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double x : series) {
        const double d = x - mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    std::vector<double> sorted(series.begin(), series.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = detail::sorted_quantile(sorted, 0.75) - detail::sorted_quantile(sorted, 0.25);
    const double mad = detail::median_abs_deviation(series);

    const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    const double kurt = m2 > 0.0 ? m4 / (m2 * m2) : 0.0;
    return {mav, m2, rms, std::sqrt(m2), mad, skew, kurt, iqr, energy};
}

dsp::PeakSet reference_peaks(std::span<const MultiModalWindow> windows) {
    std::vector<double> mean;
    std::size_t count = 0;
    for (const auto& w : windows) {
        if (w.spectrum_psd.empty()) continue;
        if (mean.empty()) mean.assign(w.spectrum_psd.size(), 0.0);
        if (w.spectrum_psd.size() != mean.size()) {
            throw Error("DimensionMismatch", kStage, "window " + std::to_string(w.window_id) + " spectrum length differs");
        }
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += w.spectrum_psd[i];
        ++count;
    }
    if (count == 0) return {};
    for (auto& v : mean) v /= static_cast<double>(count);
    return dsp::detect_peaks(mean);
}

void attach_emanation(std::span<MultiModalWindow> windows, std::span<const std::size_t> bins) {
    for (auto& w : windows) {
        w.emanation.clear();
        if (w.spectrum_psd.empty()) continue;
        for (auto b : bins) {
            if (b >= w.spectrum_psd.size()) {
                throw Error("BinOutOfRange", kStage,
                            "reference bin " + std::to_string(b) + " outside window " + std::to_string(w.window_id));
            }
            w.emanation.push_back(w.spectrum_psd[b]);
        }
    }
}

FeatureVector window_features(const MultiModalWindow& window) {
    if (window.power.empty() && window.network.empty() && window.emanation.empty()) {
        throw Error("AllModalitiesEmpty", kStage, "window " + std::to_string(window.window_id) + " has no samples");
    }
    FeatureVector out;
    out.window_id = window.window_id;
    const std::array<const std::vector<double>*, kModalities> blocks = {&window.power, &window.network,
                                                                       &window.emanation};
    for (std::size_t m = 0; m < kModalities; ++m) {
        if (blocks[m]->empty()) continue;
        const auto stats = stat_features(*blocks[m]);
        std::copy(stats.begin(), stats.end(), out.values.begin() + static_cast<std::ptrdiff_t>(m * kStatsPerModality));
    }
    return out;
}

std::vector<FeatureVector> session_features(std::span<const MultiModalWindow> windows) {
    std::vector<FeatureVector> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(window_features(w));
    return out;
}

FeatureVector keep_modality(const FeatureVector& v, Modality kept) {
    FeatureVector out;
    out.window_id = v.window_id;
    const auto first = static_cast<std::size_t>(kept) * kStatsPerModality;
    std::copy_n(v.values.begin() + static_cast<std::ptrdiff_t>(first), kStatsPerModality,
                out.values.begin() + static_cast<std::ptrdiff_t>(first));
    return out;
}

std::vector<double> Scaler::apply(std::span<const double> row) const {
    if (row.size() != means.size()) {
        throw Error("DimensionMismatch", kStage,
                    "row has " + std::to_string(row.size()) + " columns, scaler expects " + std::to_string(means.size()));
    }
    std::vector<double> out(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) out[j] = constant[j] ? 0.0 : (row[j] - means[j]) / stds[j];
    return out;
}

std::vector<std::vector<double>> Scaler::apply(const std::vector<std::vector<double>>& rows) const {
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(apply(r));
    return out;
}

Standardized fit_standardize(const std::vector<std::vector<double>>& rows) {
    if (rows.size() < 2) throw Error("TooFewVectors", kStage, "standardization needs at least two vectors");
    const std::size_t dim = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != dim) throw Error("DimensionMismatch", kStage, "ragged feature matrix");
    }
    const auto n = static_cast<double>(rows.size());
    Scaler scaler;
    scaler.means.assign(dim, 0.0);
    scaler.stds.assign(dim, 0.0);
    scaler.constant.assign(dim, false);
    for (std::size_t j = 0; j < dim; ++j) {
        double sum = 0.0;
        for (const auto& r : rows) sum += r[j];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : rows) ss += (r[j] - mean) * (r[j] - mean);
        const double sd = std::sqrt(ss / n);
        const bool flat = std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r[j] == rows[0][j]; });
        scaler.means[j] = mean;
        scaler.stds[j] = flat ? 0.0 : sd;
        scaler.constant[j] = flat || !(sd > 0.0);
    }
    Standardized out{scaler, {}};
    out.matrix = out.scaler.apply(rows);
    return out;
}

std::vector<std::vector<double>> to_matrix(std::span<const FeatureVector> vectors) {
    std::vector<std::vector<double>> rows;
    rows.reserve(vectors.size());
    for (const auto& v : vectors) rows.emplace_back(v.values.begin(), v.values.end());
    return rows;
}

std::string features_to_csv(std::span<const FeatureVector> vectors) {
    std::string out = "window_id";
    for (auto modality : kModalityNames) {
        for (auto stat : kStatNames) {
            out += ',';
            out += modality;
            out += '_';
            out += stat;
        }
    }
    out += '\n';
    for (const auto& v : vectors) {
        out += std::to_string(v.window_id);
        for (double x : v.values) {
            out += ',';
            out += format_double(x);
        }
        out += '\n';
    }
    return out;
}

}  // namespace statescope::features
