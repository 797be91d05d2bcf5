#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "statescope/dsp.hpp"
#include "statescope/trace.hpp"

namespace statescope::features {

inline constexpr std::size_t kStatsPerModality = 9;
inline constexpr std::size_t kModalities = 3;
inline constexpr std::size_t kFeatureDim = kStatsPerModality * kModalities;

/// Order of the nine statistics inside each modality block.
inline constexpr std::array<std::string_view, kStatsPerModality> kStatNames = {
    "mav", "var", "rms", "std", "mad", "skewness", "kurtosis", "iqr", "energy"};

/// Order of the modality blocks inside a FeatureVector.
inline constexpr std::array<std::string_view, kModalities> kModalityNames = {"power", "network", "emanation"};

enum class Modality : std::size_t { Power = 0, Network = 1, Emanation = 2 };

using StatBlock = std::array<double, kStatsPerModality>;

struct FeatureVector {
    std::int64_t window_id = 0;
    std::array<double, kFeatureDim> values{};
    bool operator==(const FeatureVector&) const = default;
};

/// MAV, VAR, RMS, Std, MAD, Skewness, Kurtosis, IQR, Energy of one series.
/// Population moments, Pearson kurtosis and type-7 quantiles; a series
/// without spread reports zero for every spread and shape statistic.
StatBlock stat_features(std::span<const double> series);

/// Peaks of the elementwise mean spectrum over every window that has one.
/// These bins are the emanation reference for the whole session.
dsp::PeakSet reference_peaks(std::span<const MultiModalWindow> windows);

/// Fills each window's emanation series with its spectrum at `bins`.
void attach_emanation(std::span<MultiModalWindow> windows, std::span<const std::size_t> bins);

/// Concatenated power | network | emanation blocks. An empty modality
/// contributes a zero block.
FeatureVector window_features(const MultiModalWindow& window);

std::vector<FeatureVector> session_features(std::span<const MultiModalWindow> windows);

/// Zeroes every block except the kept modality.
FeatureVector keep_modality(const FeatureVector& v, Modality kept);

struct Scaler {
    std::vector<double> means;
    std::vector<double> stds;
    std::vector<bool> constant;  // dimensions with zero spread map to 0

    bool operator==(const Scaler&) const = default;

    std::vector<double> apply(std::span<const double> row) const;
    std::vector<std::vector<double>> apply(const std::vector<std::vector<double>>& rows) const;
};

struct Standardized {
    Scaler scaler;
    std::vector<std::vector<double>> matrix;
};

Standardized fit_standardize(const std::vector<std::vector<double>>& rows);

std::vector<std::vector<double>> to_matrix(std::span<const FeatureVector> vectors);

/// One row per window: window_id followed by the 27 named columns.
std::string features_to_csv(std::span<const FeatureVector> vectors);

}  // namespace statescope::features
