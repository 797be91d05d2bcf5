#pragma once

// Deliberately naive reference implementations and seeded generators used
// as independent oracles. Nothing here shares code with src/.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Points = std::vector<std::vector<double>>;

// --- generators --------------------------------------------------------------

inline std::vector<double> random_series(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(1, 200);
    std::uniform_int_distribution<int> kind(0, 4);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-50.0, 50.0);
    const int n = len(rng);
    std::vector<double> s(static_cast<std::size_t>(n));
    switch (kind(rng)) {
        case 0: for (auto& v : s) v = gauss(rng); break;
        case 1: for (auto& v : s) v = uni(rng); break;
        case 2: {  // heavy tail
            std::exponential_distribution<double> e(0.5);
            for (auto& v : s) v = e(rng) * e(rng);
            break;
        }
        case 3: {  // integer-valued with ties, like byte counts
            std::uniform_int_distribution<int> small(0, 5);
            for (auto& v : s) v = small(rng) * 100.0;
            break;
        }
        default: {  // constant
            const double c = uni(rng);
            for (auto& v : s) v = c;
        }
    }
    return s;
}

/// `k` isotropic Gaussian blobs of `per` points in `dim` dimensions, centres
/// `separation` apart along distinct axes-ish directions.
inline Points blobs(int k, int per, int dim, double separation, double sd, std::uint64_t seed,
                    std::vector<int>* truth = nullptr) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    Points pts;
    for (int c = 0; c < k; ++c) {
        std::vector<double> centre(static_cast<std::size_t>(dim), 0.0);
        centre[static_cast<std::size_t>(c % dim)] = separation * (1 + c / dim);
        if (c >= dim) centre[static_cast<std::size_t>((c + 1) % dim)] = separation;
        for (int i = 0; i < per; ++i) {
            std::vector<double> p = centre;
            for (auto& v : p) v += g(rng);
            pts.push_back(std::move(p));
            if (truth) truth->push_back(c);
        }
    }
    return pts;
}

inline Points random_points(int n, int dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    Points pts(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& p : pts) {
        for (auto& v : p) v = u(rng);
    }
    return pts;
}

// --- statistics ----------------------------------------------------------------

/// The nine window statistics written out term by term, two-pass, with
/// quantiles by explicit linear interpolation on a sorted copy.
inline std::array<double, 9> naive_stats(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double mav = 0.0, energy = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        mav += std::fabs(v);
        energy += v * v;
        m2 += (v - mean) * (v - mean);
        m3 += (v - mean) * (v - mean) * (v - mean);
        m4 += (v - mean) * (v - mean) * (v - mean) * (v - mean);
    }
    mav /= n;
    energy /= n;
    m2 /= n;
    m3 /= n;
    m4 /= n;
    auto quantile = [](std::vector<double> s, double q) {
        std::sort(s.begin(), s.end());
        const double h = (static_cast<double>(s.size()) - 1.0) * q;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = static_cast<std::size_t>(std::ceil(h));
        return s[lo] + (h - std::floor(h)) * (s[hi] - s[lo]);
    };
    bool constant = true;
    for (double v : x) constant = constant && v == x[0];
    const double med = quantile(x, 0.5);
    std::vector<double> dev;
    for (double v : x) dev.push_back(std::fabs(v - med));
    const double mad = constant ? 0.0 : quantile(dev, 0.5);
    const double iqr = constant ? 0.0 : quantile(x, 0.75) - quantile(x, 0.25);
    const double var = constant ? 0.0 : m2;
    const double skew = (constant || m2 == 0.0) ? 0.0 : m3 / std::pow(m2, 1.5);
    const double kurt = (constant || m2 == 0.0) ? 0.0 : m4 / (m2 * m2);
    return {mav, var, std::sqrt(energy), std::sqrt(var), mad, skew, kurt, iqr, energy};
}

// --- spectra -------------------------------------------------------------------

/// O(N^2) DFT straight from the definition.
inline std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{};
        for (std::size_t t = 0; t < n; ++t) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

// --- clustering ----------------------------------------------------------------

/// Minimum 2-means inertia by enumerating every bipartition.
inline double best_two_partition_inertia(const Points& pts) {
    const std::size_t n = pts.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << n); ++mask) {
        double total = 0.0;
        for (int side = 0; side < 2; ++side) {
            std::vector<double> c(pts[0].size(), 0.0);
            int count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1U) != static_cast<unsigned>(side)) continue;
                for (std::size_t d = 0; d < c.size(); ++d) c[d] += pts[i][d];
                ++count;
            }
            for (auto& v : c) v /= count;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1U) != static_cast<unsigned>(side)) continue;
                for (std::size_t d = 0; d < c.size(); ++d) total += (pts[i][d] - c[d]) * (pts[i][d] - c[d]);
            }
        }
        best = std::min(best, total);
    }
    return best;
}

/// Best matched count over every injective cluster -> truth assignment.
inline std::int64_t brute_force_matched(const std::vector<int>& pred, const std::vector<std::string>& truth) {
    std::vector<int> clusters;
    for (int c : pred) {
        if (c >= 0 && std::find(clusters.begin(), clusters.end(), c) == clusters.end()) clusters.push_back(c);
    }
    std::vector<std::string> labels(truth.begin(), truth.end());
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    // Pad the label side with "no match" slots so permutations cover partial maps.
    std::vector<int> slots(std::max(labels.size(), clusters.size()));
    std::iota(slots.begin(), slots.end(), 0);
    std::int64_t best = 0;
    do {
        std::int64_t matched = 0;
        for (std::size_t c = 0; c < clusters.size(); ++c) {
            const auto slot = static_cast<std::size_t>(slots[c]);
            if (slot >= labels.size()) continue;
            for (std::size_t i = 0; i < pred.size(); ++i) matched += (pred[i] == clusters[c] && truth[i] == labels[slot]) ? 1 : 0;
        }
        best = std::max(best, matched);
    } while (std::next_permutation(slots.begin(), slots.end()));
    return best;
}

/// Partition of indices induced by labels, ignoring label names.
inline std::set<std::set<std::size_t>> partition_of(const std::vector<int>& labels) {
    std::map<int, std::set<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].insert(i);
    std::set<std::set<std::size_t>> out;
    for (auto& [l, g] : groups) {
        if (l != -1) out.insert(g);
    }
    return out;
}

}  // namespace oracle
