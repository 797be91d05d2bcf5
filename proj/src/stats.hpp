#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace statescope::detail {

/// Type-7 (linear interpolation) quantile of an ascending sequence.
inline double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double median(std::span<const double> values) {
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    return sorted_quantile(s, 0.5);
}

/// Unscaled median absolute deviation about the median.
inline double median_abs_deviation(std::span<const double> values) {
    const double m = median(values);
    std::vector<double> dev;
    dev.reserve(values.size());
    for (double v : values) dev.push_back(std::abs(v - m));
    return median(dev);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace statescope::detail
