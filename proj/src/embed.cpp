#include "statescope/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include "statescope/error.hpp"
#include "statescope/trace.hpp"
#include "stats.hpp"

namespace statescope::embed {

namespace {

constexpr const char* kStage = "embed";
constexpr int kMaxBisection = 200;
constexpr double kEntropyTol = 1e-5;

std::vector<double> pairwise_squared(const Matrix& data) {
    const std::size_t n = data.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = detail::squared_distance(data[i], data[j]);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    return d;
}

struct RowEval {
    std::vector<double> p;
    double entropy_bits = 0.0;
};

RowEval evaluate_row(std::span<const double> d, double d_min, double beta) {
    RowEval out;
    out.p.resize(d.size());
    double z = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        out.p[j] = std::exp(-beta * (d[j] - d_min));
        z += out.p[j];
    }
    double h = 0.0;
    for (auto& v : out.p) {
        v /= z;
        if (v > 0.0) h -= v * std::log2(v);
    }
    out.entropy_bits = h;
    return out;
}

/// Student-t kernel values (upper triangle mirrored) and their sum.
double student_kernel(const Matrix& y, std::vector<double>& num) {
    const std::size_t n = y.size();
    num.assign(n * n, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = y[i][0] - y[j][0];
            const double dy = y[i][1] - y[j][1];
            const double v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    return sum;
}

void gradient_into(std::span<const double> p, double exaggeration, const Matrix& y, std::vector<double>& num,
                   Matrix& grad) {
    const std::size_t n = y.size();
    const double sum = student_kernel(y, num);
    grad.assign(n, std::vector<double>(2, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double gx = 0.0;
        double gy = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double k = num[i * n + j];
            const double mult = (exaggeration * p[i * n + j] - k / sum) * k;
            gx += mult * (y[i][0] - y[j][0]);
            gy += mult * (y[i][1] - y[j][1]);
        }
        grad[i][0] = 4.0 * gx;
        grad[i][1] = 4.0 * gy;
    }
}

}  // namespace

void TsneConfig::validate() const {
    if (!(perplexity >= 2.0)) throw Error("InvalidConfig", kStage, "perplexity must be at least 2");
    if (n_iter < 250) throw Error("InvalidConfig", kStage, "n_iter must be at least 250");
    if (!(learning_rate > 0.0)) throw Error("InvalidConfig", kStage, "learning_rate must be positive");
    if (!(exaggeration_factor >= 1.0)) throw Error("InvalidConfig", kStage, "exaggeration_factor must be >= 1");
}

RowCalibration calibrate_row(std::span<const double> d, double perplexity) {
    if (d.size() < 2) throw Error("RowTooShort", kStage, "calibration needs at least two neighbours");
    if (!(perplexity > 0.0)) throw Error("InvalidConfig", kStage, "perplexity must be positive");
    const double target = std::log2(perplexity);
    const double d_min = *std::min_element(d.begin(), d.end());

    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    RowCalibration best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int step = 0; step < kMaxBisection; ++step) {
        auto eval = evaluate_row(d, d_min, beta);
        const double gap = eval.entropy_bits - target;
        if (std::abs(gap) < best_gap) {
            best_gap = std::abs(gap);
            best.sigma = std::sqrt(1.0 / (2.0 * beta));
            best.probabilities = std::move(eval.p);
            best.entropy_bits = eval.entropy_bits;
        }
        if (std::abs(gap) < kEntropyTol) {
            best.converged = true;
            break;
        }
        if (gap > 0.0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    return best;
}

std::vector<double> joint_affinities(const Matrix& data, double perplexity) {
    const std::size_t n = data.size();
    if (n < 3) throw Error("TooFewPoints", kStage, "affinities need at least three points");
    const auto dist = pairwise_squared(data);
    std::vector<double> cond(n * n, 0.0);
    std::vector<double> row(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0, k = 0; j < n; ++j) {
            if (j != i) row[k++] = dist[i * n + j];
        }
        const auto cal = calibrate_row(row, perplexity);
        for (std::size_t j = 0, k = 0; j < n; ++j) {
            if (j != i) cond[i * n + j] = cal.probabilities[k++];
        }
    }
    std::vector<double> p(n * n, 0.0);
    const double denom = 2.0 * static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
    }
    return p;
}

double kl_divergence(std::span<const double> p, const Matrix& layout) {
    const std::size_t n = layout.size();
    std::vector<double> num;
    const double sum = student_kernel(layout, num);
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double pij = p[i * n + j];
            if (i == j || pij <= 0.0) continue;
            const double q = std::max(num[i * n + j] / sum, 1e-300);
            kl += pij * std::log(pij / q);
        }
    }
    return std::max(kl, 0.0);
}

Matrix tsne_gradient(std::span<const double> p, const Matrix& layout) {
    std::vector<double> num;
    Matrix grad;
    gradient_into(p, 1.0, layout, num, grad);
    return grad;
}

namespace {

/// Index of the first row identical to each row.
std::vector<std::size_t> duplicate_owner(const Matrix& data) {
    std::map<std::vector<double>, std::size_t> first;
    std::vector<std::size_t> owner(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) owner[i] = first.emplace(data[i], i).first->second;
    return owner;
}

}  // namespace

Matrix jitter_duplicates(const Matrix& data, std::uint64_t seed, double magnitude) {
    Matrix out = data;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::map<std::vector<double>, int> seen;
    for (auto& row : out) {
        if (++seen[row] > 1) {
            for (auto& v : row) v += magnitude * unit(rng);
        }
    }
    return out;
}

Embedding tsne(const Matrix& data, const TsneConfig& config) {
    config.validate();
    const std::size_t n = data.size();
    if (n < 4) throw Error("TooFewPoints", kStage, "t-SNE needs at least four points");
    for (const auto& row : data) {
        if (row.size() != data.front().size()) throw Error("DimensionMismatch", kStage, "ragged input matrix");
        if (!std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); })) {
            throw Error("NonFinite", kStage, "input contains a non-finite value");
        }
    }

    const double perplexity = std::min(config.perplexity, (static_cast<double>(n) - 1.0) / 3.0);
    const auto p = joint_affinities(jitter_duplicates(data, config.seed), perplexity);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> init(0.0, 1e-4);
    Matrix y(n, std::vector<double>(2));
    for (auto& row : y) {
        row[0] = init(rng);
        row[1] = init(rng);
    }
    // Identical input rows share one layout point: they start together and
    // move by their mean gradient. The jitter only bounds the bandwidth search.
    const auto owner = duplicate_owner(data);
    std::vector<std::vector<std::size_t>> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[owner[i]].push_back(i);
    const bool tied = std::any_of(groups.begin(), groups.end(), [](const auto& g) { return g.size() > 1; });
    for (std::size_t i = 0; i < n; ++i) y[i] = y[owner[i]];

    Embedding out;
    out.kl_initial = kl_divergence(p, y);

    Matrix update(n, std::vector<double>(2, 0.0));
    Matrix gains(n, std::vector<double>(2, 1.0));
    Matrix grad;
    std::vector<double> num;
    for (int iter = 0; iter < config.n_iter; ++iter) {
        const double exaggeration = iter < config.exaggeration_iters ? config.exaggeration_factor : 1.0;
        const double momentum = iter < config.momentum_switch_iter ? config.initial_momentum : config.final_momentum;
        gradient_into(p, exaggeration, y, num, grad);
        if (tied) {
            for (const auto& g : groups) {
                if (g.size() < 2) continue;
                double gx = 0.0;
                double gy = 0.0;
                for (std::size_t i : g) {
                    gx += grad[i][0];
                    gy += grad[i][1];
                }
                for (std::size_t i : g) grad[i] = {gx / static_cast<double>(g.size()), gy / static_cast<double>(g.size())};
            }
        }
        double mean[2] = {0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            for (int d = 0; d < 2; ++d) {
                const bool same_sign = (grad[i][d] > 0.0) == (update[i][d] > 0.0);
                gains[i][d] = same_sign ? std::max(gains[i][d] * 0.8, 0.01) : gains[i][d] + 0.2;
                update[i][d] = momentum * update[i][d] - config.learning_rate * gains[i][d] * grad[i][d];
                y[i][d] += update[i][d];
                mean[d] += y[i][d];
            }
        }
        for (auto& row : y) {
            row[0] -= mean[0] / static_cast<double>(n);
            row[1] -= mean[1] / static_cast<double>(n);
        }
    }
    out.kl_final = kl_divergence(p, y);
    out.points = std::move(y);
    return out;
}

std::string embedding_to_csv(const Embedding& embedding, std::span<const std::int64_t> window_ids) {
    std::string out = "window_id,x,y\n";
    for (std::size_t i = 0; i < embedding.points.size(); ++i) {
        out += std::to_string(i < window_ids.size() ? window_ids[i] : static_cast<std::int64_t>(i));
        out += ',';
        out += format_double(embedding.points[i][0]);
        out += ',';
        out += format_double(embedding.points[i][1]);
        out += '\n';
    }
    return out;
}

}  // namespace statescope::embed
