#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "check.hpp"
#include "oracles.hpp"
#include "statescope/embed.hpp"

using namespace statescope;
using embed::Matrix;

namespace {

double entropy_bits(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p) {
        if (v > 0.0) h -= v * std::log2(v);
    }
    return h;
}

/// KL(P||Q) with Q recomputed from scratch.
double naive_kl(const std::vector<double>& p, const Matrix& y) {
    const std::size_t n = y.size();
    std::vector<double> q(n * n, 0.0);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = y[i][0] - y[j][0];
            const double dy = y[i][1] - y[j][1];
            q[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
            z += q[i * n + j];
        }
    }
    double kl = 0.0;
    for (std::size_t k = 0; k < n * n; ++k) {
        if (p[k] > 0.0) kl += p[k] * std::log(p[k] / (q[k] / z));
    }
    return kl;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

embed::TsneConfig quick(std::uint64_t seed) {
    embed::TsneConfig c;
    c.seed = seed;
    c.n_iter = 500;
    return c;
}

embed::TsneConfig defaults(std::uint64_t seed) {
    embed::TsneConfig c;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_SUITE("embed") {

TEST_CASE("calibration on equal distances is uniform") {
    const std::vector<double> d(9, 4.0);
    const auto cal = embed::calibrate_row(d, 9.0);
    for (double p : cal.probabilities) CHECK(p == doctest::Approx(1.0 / 9.0).epsilon(1e-12));
    CHECK(cal.entropy_bits == doctest::Approx(std::log2(9.0)));

    const std::vector<double> one{1.0};
    CHECK_ERROR_CODE(embed::calibrate_row(one, 2.0), "RowTooShort");
}

TEST_CASE("calibration hits the target entropy on random rows") {
    std::mt19937_64 rng(99);
    std::exponential_distribution<double> e(0.3);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(trial % 120);
        std::vector<double> d(n);
        for (auto& v : d) v = e(rng) * e(rng);
        const double perplexity = std::uniform_real_distribution<double>(2.0, 0.8 * static_cast<double>(n))(rng);
        const auto cal = embed::calibrate_row(d, perplexity);
        CHECK(cal.converged);
        const double sum = std::accumulate(cal.probabilities.begin(), cal.probabilities.end(), 0.0);
        CHECK(std::abs(sum - 1.0) < 1e-12);
        CHECK(std::abs(entropy_bits(cal.probabilities) - std::log2(perplexity)) <= 1e-4);
    }
}

TEST_CASE("joint affinities are symmetric, non-negative and normalized") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pts = oracle::random_points(10 + trial, 4, rng);
        const auto p = embed::joint_affinities(pts, 3.0);
        const std::size_t n = pts.size();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(p[i * n + i] == 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(p[i * n + j] >= 0.0);
                CHECK(p[i * n + j] == p[j * n + i]);
                total += p[i * n + j];
            }
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
    }
    CHECK_ERROR_CODE(embed::joint_affinities({{0.0}, {1.0}}, 2.0), "TooFewPoints");
}

TEST_CASE("KL divergence matches a direct computation") {
    std::mt19937_64 rng(6);
    const auto pts = oracle::random_points(12, 3, rng);
    const auto p = embed::joint_affinities(pts, 3.0);
    const auto y = oracle::random_points(12, 2, rng);
    CHECK(embed::kl_divergence(p, y) == doctest::Approx(naive_kl(p, y)).epsilon(1e-10));
    CHECK(embed::kl_divergence(p, y) >= 0.0);
}

TEST_CASE("gradient matches finite differences of KL") {
    std::mt19937_64 rng(12);
    const auto pts = oracle::random_points(9, 3, rng);
    const auto p = embed::joint_affinities(pts, 2.5);
    auto y = oracle::random_points(9, 2, rng);
    for (auto& row : y) {
        row[0] *= 0.1;
        row[1] *= 0.1;
    }
    const auto g = embed::tsne_gradient(p, y);
    const double h = 1e-6;
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (int d = 0; d < 2; ++d) {
            auto plus = y;
            auto minus = y;
            plus[i][static_cast<std::size_t>(d)] += h;
            minus[i][static_cast<std::size_t>(d)] -= h;
            const double fd = (naive_kl(p, plus) - naive_kl(p, minus)) / (2.0 * h);
            CHECK(g[i][static_cast<std::size_t>(d)] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
        }
    }
}

TEST_CASE("pairwise forces cancel") {
    // Two points placed symmetrically about the origin.
    const std::vector<double> p{0.0, 0.5, 0.5, 0.0};
    const Matrix y{{-0.3, 0.7}, {0.3, -0.7}};
    const auto g = embed::tsne_gradient(p, y);
    CHECK(g[0][0] == doctest::Approx(-g[1][0]));
    CHECK(g[0][1] == doctest::Approx(-g[1][1]));

    std::mt19937_64 rng(8);
    const auto pts = oracle::random_points(15, 5, rng);
    const auto pj = embed::joint_affinities(pts, 4.0);
    const auto layout = oracle::random_points(15, 2, rng);
    const auto gj = embed::tsne_gradient(pj, layout);
    double sx = 0.0;
    double sy = 0.0;
    for (const auto& row : gj) {
        sx += row[0];
        sy += row[1];
    }
    CHECK(std::abs(sx) < 1e-6);
    CHECK(std::abs(sy) < 1e-6);
}

TEST_CASE("tsne is deterministic and lowers KL") {
    std::vector<int> truth;
    const auto pts = oracle::blobs(3, 12, 6, 20.0, 1.0, 3, &truth);
    const auto a = embed::tsne(pts, quick(5));
    const auto b = embed::tsne(pts, quick(5));
    CHECK(a.points == b.points);
    CHECK(a.kl_final == b.kl_final);
    CHECK(a.kl_final <= a.kl_initial);
    CHECK(a.kl_final >= 0.0);
    double cx = 0.0;
    for (const auto& row : a.points) cx += row[0];
    CHECK(std::abs(cx / static_cast<double>(a.points.size())) < 1e-6);
}

TEST_CASE("three distant blobs stay separated") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<int> truth;
        const auto pts = oracle::blobs(3, 10, 27, 50.0, 1.0, 100 + seed, &truth);
        const auto e = embed::tsne(pts, defaults(seed));
        double intra = 0.0;
        double inter = 1e300;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double d = dist(e.points[i], e.points[j]);
                if (truth[i] == truth[j]) {
                    intra = std::max(intra, d);
                } else {
                    inter = std::min(inter, d);
                }
            }
        }
        CHECK(intra < inter);
    }
}

TEST_CASE("duplicated points land together") {
    std::mt19937_64 rng(31);
    auto pts = oracle::random_points(15, 4, rng);
    const auto copy = pts;
    pts.insert(pts.end(), copy.begin(), copy.end());
    const auto e = embed::tsne(pts, defaults(2));
    for (std::size_t i = 0; i < copy.size(); ++i) CHECK(dist(e.points[i], e.points[i + copy.size()]) < 1e-3);

    const auto j = embed::jitter_duplicates(pts, 1);
    for (std::size_t i = 0; i < copy.size(); ++i) {
        CHECK(j[i] == pts[i]);
        CHECK(j[i + copy.size()] != pts[i + copy.size()]);
        for (std::size_t d = 0; d < 4; ++d) CHECK(std::abs(j[i + copy.size()][d] - pts[i][d]) < 1e-8);
    }
}

TEST_CASE("config validation") {
    const Matrix pts{{0}, {1}, {2}, {3}, {4}};
    auto c = quick(1);
    c.perplexity = 1.5;
    CHECK_ERROR_CODE(embed::tsne(pts, c), "InvalidConfig");
    c = quick(1);
    c.n_iter = 100;
    CHECK_ERROR_CODE(embed::tsne(pts, c), "InvalidConfig");
    CHECK_ERROR_CODE(embed::tsne({{0}, {1}, {2}}, quick(1)), "TooFewPoints");
    CHECK_ERROR_CODE(embed::tsne({{0}, {1}, {2}, {NAN}}, quick(1)), "NonFinite");
}

TEST_CASE("embedding csv") {
    embed::Embedding e;
    e.points = {{0.5, -1.0}, {2.0, 3.0}};
    const std::vector<std::int64_t> ids{4, 9};
    CHECK(embed::embedding_to_csv(e, ids) == "window_id,x,y\n4,0.5,-1\n9,2,3\n");
}

}  // TEST_SUITE
