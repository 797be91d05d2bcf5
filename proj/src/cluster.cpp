#include "statescope/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "statescope/error.hpp"
#include "stats.hpp"

namespace statescope::cluster {

namespace {

constexpr const char* kStage = "cluster";

void check_points(const Points& points) {
    for (const auto& p : points) {
        if (p.size() != points.front().size()) throw Error("DimensionMismatch", kStage, "ragged point matrix");
    }
}

/// Indices sorted by coordinates, so seeded steps see the same sequence
/// whatever the input order.
std::vector<std::size_t> canonical_order(const Points& points) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
    return order;
}

std::vector<double> mean_of(const Points& points, const std::vector<std::size_t>& members, std::size_t dim) {
    std::vector<double> m(dim, 0.0);
    for (auto i : members) {
        for (std::size_t d = 0; d < dim; ++d) m[d] += points[i][d];
    }
    for (auto& v : m) v /= static_cast<double>(members.size());
    return m;
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::KMeans: return "kmeans";
        case Algorithm::Dbscan: return "dbscan";
        case Algorithm::Gmm: return "gmm";
    }
    return "kmeans";
}

Algorithm parse_algorithm(std::string_view text) {
    if (text == "kmeans") return Algorithm::KMeans;
    if (text == "dbscan") return Algorithm::Dbscan;
    if (text == "gmm") return Algorithm::Gmm;
    throw Error("UnknownAlgorithm", kStage, "unknown clustering algorithm `" + std::string(text) + "`");
}

KMeansResult kmeans(const Points& input, int k, std::uint64_t seed, int max_iter, double tol) {
    if (k < 1) throw Error("InvalidK", kStage, "k must be at least 1");
    if (static_cast<std::size_t>(k) > input.size()) {
        throw Error("KExceedsN", kStage, "k=" + std::to_string(k) + " exceeds " + std::to_string(input.size()) + " points");
    }
    check_points(input);
    const auto order = canonical_order(input);
    Points pts;
    pts.reserve(input.size());
    for (auto i : order) pts.push_back(input[i]);
    const std::size_t n = pts.size();
    const std::size_t dim = pts.front().size();
    const auto uk = static_cast<std::size_t>(k);

    // k-means++ seeding
    std::mt19937_64 rng(seed);
    Points centroids;
    std::vector<bool> chosen(n, false);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    const std::size_t c0 = first(rng);
    centroids.push_back(pts[c0]);
    chosen[c0] = true;
    std::vector<double> d2(n);
    while (centroids.size() < uk) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, detail::squared_distance(pts[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double r = u(rng);
            for (pick = 0; pick + 1 < n; ++pick) {
                if (r < d2[pick]) break;
                r -= d2[pick];
            }
        } else {
            while (chosen[pick]) ++pick;
        }
        chosen[pick] = true;
        centroids.push_back(pts[pick]);
    }

    KMeansResult result;
    std::vector<int> labels(n, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < uk; ++c) {
                const double d = detail::squared_distance(pts[i], centroids[c]);
                if (d < best) {
                    best = d;
                    labels[i] = static_cast<int>(c);
                }
            }
            inertia += best;
            d2[i] = best;
        }
        result.inertia_history.push_back(inertia);

        std::vector<std::vector<std::size_t>> members(uk);
        for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
        double shift = 0.0;
        for (std::size_t c = 0; c < uk; ++c) {
            std::vector<double> next;
            if (members[c].empty()) {
                // Reseed to the point worst served by its current centroid.
                const auto far = static_cast<std::size_t>(std::max_element(d2.begin(), d2.end()) - d2.begin());
                next = pts[far];
                d2[far] = 0.0;
            } else {
                next = mean_of(pts, members[c], dim);
            }
            shift += detail::squared_distance(next, centroids[c]);
            centroids[c] = std::move(next);
        }
        if (shift <= tol) break;
    }
    // Final assignment against the last centroids.
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < uk; ++c) {
            const double d = detail::squared_distance(pts[i], centroids[c]);
            if (d < best) {
                best = d;
                labels[i] = static_cast<int>(c);
            }
        }
        inertia += best;
    }
    result.inertia_history.push_back(inertia);

    result.assignment.labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) result.assignment.labels[order[i]] = labels[i];
    result.assignment.k = k;
    result.assignment.algorithm = Algorithm::KMeans;
    result.assignment.quality = inertia;
    result.centroids = std::move(centroids);
    return result;
}

ClusterAssignment dbscan(const Points& points, double eps, int min_pts) {
    if (!(eps > 0.0)) throw Error("InvalidParameter", kStage, "eps must be positive");
    if (min_pts < 1) throw Error("InvalidParameter", kStage, "min_pts must be at least 1");
    check_points(points);
    const std::size_t n = points.size();
    const double eps2 = eps * eps;

    std::vector<std::vector<std::size_t>> neighbours(n);
    for (std::size_t i = 0; i < n; ++i) {
        neighbours[i].push_back(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (detail::squared_distance(points[i], points[j]) <= eps2) {
                neighbours[i].push_back(j);
                neighbours[j].push_back(i);
            }
        }
    }
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = neighbours[i].size() >= static_cast<std::size_t>(min_pts);

    // Connected components over core points.
    std::vector<int> component(n, kNoise);
    int components = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || component[i] != kNoise) continue;
        std::deque<std::size_t> queue{i};
        component[i] = components;
        while (!queue.empty()) {
            const auto p = queue.front();
            queue.pop_front();
            for (auto q : neighbours[p]) {
                if (core[q] && component[q] == kNoise) {
                    component[q] = components;
                    queue.push_back(q);
                }
            }
        }
        ++components;
    }
    // Border points join their nearest core neighbour; ties go to the
    // lexicographically smallest core point.
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        std::optional<std::size_t> best;
        double best_d = std::numeric_limits<double>::infinity();
        for (auto q : neighbours[i]) {
            if (!core[q]) continue;
            const double d = detail::squared_distance(points[i], points[q]);
            if (d < best_d || (d == best_d && points[q] < points[*best])) {
                best_d = d;
                best = q;
            }
        }
        if (best) component[i] = component[*best];
    }

    std::map<int, int> renumber;
    ClusterAssignment out;
    out.labels.assign(n, kNoise);
    for (std::size_t i = 0; i < n; ++i) {
        if (component[i] == kNoise) continue;
        auto [it, fresh] = renumber.emplace(component[i], static_cast<int>(renumber.size()));
        out.labels[i] = it->second;
    }
    out.k = static_cast<int>(renumber.size());
    out.algorithm = Algorithm::Dbscan;
    return out;
}

EpsChoice auto_eps(const Points& points, int min_pts) {
    if (min_pts < 1) throw Error("InvalidParameter", kStage, "min_pts must be at least 1");
    if (points.size() <= static_cast<std::size_t>(min_pts)) {
        throw Error("TooFewPoints", kStage, "auto_eps needs more than min_pts points");
    }
    check_points(points);
    const std::size_t n = points.size();
    EpsChoice out;
    out.k_distances.reserve(n);
    std::vector<double> row(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0, k = 0; j < n; ++j) {
            if (j != i) row[k++] = std::sqrt(detail::squared_distance(points[i], points[j]));
        }
        const auto kth = row.begin() + (min_pts - 1);
        std::nth_element(row.begin(), kth, row.end());
        out.k_distances.push_back(*kth);
    }
    std::sort(out.k_distances.begin(), out.k_distances.end());

    const auto& d = out.k_distances;
    const double lo = d.front();
    const double hi = d.back();
    auto fallback = [&] {
        out.used_fallback = true;
        out.eps = detail::sorted_quantile(d, 0.9);
        if (!(out.eps > 0.0)) out.eps = hi > 0.0 ? hi : 1e-12;
        return out;
    };
    if (n < 3 || hi - lo <= 1e-9 * std::abs(hi)) return fallback();

    // Curvature of the polyline (rank, distance) with unit rank spacing.
    // Only upward bends count: the elbow is where distances start to grow
    // faster, not where a steep start levels off. The search skips the lower
    // half, whose small jitter in dense regions otherwise wins in high dims.
    double best_kappa = 0.0;
    std::size_t best_i = 0;
    for (std::size_t i = std::max<std::size_t>(1, n / 2); i + 1 < n; ++i) {
        const double bend = d[i + 1] - 2.0 * d[i] + d[i - 1];
        const double slope = 0.5 * (d[i + 1] - d[i - 1]);
        const double kappa = bend / std::pow(1.0 + slope * slope, 1.5);
        if (kappa > best_kappa) {
            best_kappa = kappa;
            best_i = i;
        }
    }
    if (best_kappa <= 1e-12 * (hi - lo) || !(d[best_i] > 0.0)) return fallback();
    out.eps = d[best_i];
    return out;
}

GmmResult gmm(const Points& points, int k, std::uint64_t seed, int max_iter, double tol, double reg) {
    if (k < 1) throw Error("InvalidK", kStage, "k must be at least 1");
    if (static_cast<std::size_t>(k) > points.size()) {
        throw Error("KExceedsN", kStage, "k=" + std::to_string(k) + " exceeds " + std::to_string(points.size()) + " points");
    }
    check_points(points);
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const std::size_t n = points.size();
    const auto dim = static_cast<Eigen::Index>(points.front().size());
    const auto uk = static_cast<std::size_t>(k);

    MatrixXd x(static_cast<Eigen::Index>(n), dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < dim; ++d) x(static_cast<Eigen::Index>(i), d) = points[i][static_cast<std::size_t>(d)];
    }
    const MatrixXd reg_eye = reg * MatrixXd::Identity(dim, dim);
    const VectorXd global_mean = x.colwise().mean();
    const MatrixXd centered_all = x.rowwise() - global_mean.transpose();
    const MatrixXd global_cov = (centered_all.transpose() * centered_all) / static_cast<double>(n) + reg_eye;

    // k-means initialisation
    const auto km = kmeans(points, k, seed);
    std::vector<VectorXd> means(uk);
    std::vector<MatrixXd> covs(uk);
    std::vector<double> weights(uk);
    for (std::size_t c = 0; c < uk; ++c) {
        std::vector<Eigen::Index> members;
        for (std::size_t i = 0; i < n; ++i) {
            if (km.assignment.labels[i] == static_cast<int>(c)) members.push_back(static_cast<Eigen::Index>(i));
        }
        means[c] = Eigen::Map<const VectorXd>(km.centroids[c].data(), dim);
        weights[c] = std::max<double>(static_cast<double>(members.size()), 1.0) / static_cast<double>(n);
        if (members.size() < 2) {
            covs[c] = global_cov;
            continue;
        }
        MatrixXd cov = MatrixXd::Zero(dim, dim);
        for (auto i : members) {
            const VectorXd diff = x.row(i).transpose() - means[c];
            cov += diff * diff.transpose();
        }
        covs[c] = cov / static_cast<double>(members.size()) + reg_eye;
    }
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= wsum;

    GmmResult result;
    MatrixXd log_resp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(uk));
    const double log_2pi = std::log(2.0 * std::numbers::pi);

    auto e_step = [&]() {
        for (std::size_t c = 0; c < uk; ++c) {
            Eigen::LLT<MatrixXd> llt(covs[c]);
            if (llt.info() != Eigen::Success) {
                throw Error("SingularCovariance", kStage, "component " + std::to_string(c) + " covariance is singular");
            }
            const MatrixXd& l = llt.matrixL();
            const double log_det = 2.0 * l.diagonal().array().log().sum();
            const MatrixXd centered = (x.rowwise() - means[c].transpose()).transpose();
            const MatrixXd solved = llt.matrixL().solve(centered);
            const VectorXd maha = solved.colwise().squaredNorm().transpose();
            const double log_w = std::log(std::max(weights[c], 1e-300));
            log_resp.col(static_cast<Eigen::Index>(c)) =
                (-0.5 * (maha.array() + static_cast<double>(dim) * log_2pi + log_det) + log_w).matrix();
        }
        double ll = 0.0;
        for (Eigen::Index i = 0; i < log_resp.rows(); ++i) {
            const double m = log_resp.row(i).maxCoeff();
            const double lse = m + std::log((log_resp.row(i).array() - m).exp().sum());
            log_resp.row(i).array() -= lse;
            ll += lse;
        }
        return ll;
    };

    double ll = e_step();
    result.log_likelihood_history.push_back(ll);
    for (int iter = 0; iter < max_iter; ++iter) {
        const MatrixXd resp = log_resp.array().exp().matrix();
        for (std::size_t c = 0; c < uk; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            const double nk = resp.col(ci).sum();
            weights[c] = nk / static_cast<double>(n);
            if (nk < 1e-12) continue;  // collapsed component keeps its shape
            means[c] = (x.transpose() * resp.col(ci)) / nk;
            const MatrixXd centered = x.rowwise() - means[c].transpose();
            covs[c] = (centered.transpose() * resp.col(ci).asDiagonal() * centered) / nk + reg_eye;
        }
        const double next = e_step();
        result.log_likelihood_history.push_back(next);
        const bool converged = std::abs(next - ll) <= tol * std::max(1.0, std::abs(next));
        ll = next;
        if (converged) break;
    }

    result.assignment.algorithm = Algorithm::Gmm;
    result.assignment.k = k;
    result.assignment.quality = ll;
    result.assignment.labels.resize(n);
    result.responsibilities.assign(n, std::vector<double>(uk));
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        int best = 0;
        for (std::size_t c = 0; c < uk; ++c) {
            result.responsibilities[i][c] = std::exp(log_resp(ii, static_cast<Eigen::Index>(c)));
            if (log_resp(ii, static_cast<Eigen::Index>(c)) > log_resp(ii, best)) best = static_cast<int>(c);
        }
        result.assignment.labels[i] = best;
    }
    result.weights = weights;
    for (std::size_t c = 0; c < uk; ++c) {
        result.means.emplace_back(means[c].data(), means[c].data() + dim);
        std::vector<double> flat(static_cast<std::size_t>(dim * dim));
        for (Eigen::Index r = 0; r < dim; ++r) {
            for (Eigen::Index s = 0; s < dim; ++s) flat[static_cast<std::size_t>(r * dim + s)] = covs[c](r, s);
        }
        result.covariances.push_back(std::move(flat));
    }
    return result;
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weights) {
    const std::size_t rows = weights.size();
    const std::size_t cols = rows ? weights.front().size() : 0;
    const std::size_t n = std::max(rows, cols);
    if (n == 0) return {};
    double top = 0.0;
    for (const auto& r : weights) {
        for (double w : r) top = std::max(top, w);
    }
    // Square cost matrix for minimisation; padding costs `top` (zero weight).
    auto cost = [&](std::size_t i, std::size_t j) {
        const double w = (i < rows && j < cols) ? weights[i][j] : 0.0;
        return top - w;
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<bool> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> match(rows, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t i = p[j];
        if (i >= 1 && i <= rows && j <= cols) match[i - 1] = static_cast<int>(j - 1);
    }
    return match;
}

namespace {

void fill_metrics(EvalReport& r, std::size_t total) {
    const std::size_t rows = r.true_labels.size();
    const std::size_t cols = r.pred_labels.size();
    std::vector<std::int64_t> col_sum(cols, 0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) col_sum[j] += r.confusion[i][j];
    }
    double p_sum = 0.0;
    double r_sum = 0.0;
    std::int64_t matched = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        const std::int64_t row_sum = std::accumulate(r.confusion[i].begin(), r.confusion[i].end(), std::int64_t{0});
        if (!r.mapping[i]) continue;
        const auto j = *r.mapping[i];
        const std::int64_t hit = r.confusion[i][j];
        matched += hit;
        if (col_sum[j] > 0) p_sum += static_cast<double>(hit) / static_cast<double>(col_sum[j]);
        if (row_sum > 0) r_sum += static_cast<double>(hit) / static_cast<double>(row_sum);
    }
    const double k = static_cast<double>(std::max<std::size_t>(rows, 1));
    r.precision = p_sum / k;
    r.recall = r_sum / k;
    r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    r.accuracy = total > 0 ? static_cast<double>(matched) / static_cast<double>(total) : 0.0;
}

}  // namespace

EvalReport evaluate(const std::vector<int>& pred, const std::vector<std::string>& truth) {
    if (pred.size() != truth.size()) {
        throw Error("LengthMismatch", kStage,
                    std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) + " labels");
    }
    EvalReport r;
    const std::set<std::string> true_set(truth.begin(), truth.end());
    r.true_labels.assign(true_set.begin(), true_set.end());
    std::set<int> clusters;
    bool noise = false;
    for (int c : pred) {
        if (c == kNoise) {
            noise = true;
        } else {
            clusters.insert(c);
        }
    }
    std::vector<int> cols(clusters.begin(), clusters.end());
    if (noise) cols.push_back(kNoise);
    for (int c : cols) r.pred_labels.push_back(std::to_string(c));

    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < r.true_labels.size(); ++i) row_of[r.true_labels[i]] = i;
    std::map<int, std::size_t> col_of;
    for (std::size_t j = 0; j < cols.size(); ++j) col_of[cols[j]] = j;
    r.confusion.assign(r.true_labels.size(), std::vector<std::int64_t>(cols.size(), 0));
    for (std::size_t i = 0; i < pred.size(); ++i) ++r.confusion[row_of[truth[i]]][col_of[pred[i]]];

    // Matched counts decide; among equally good matchings the one with the
    // larger per-pair precision + recall (then precision) wins, so the metrics
    // do not depend on how clusters happen to be numbered.
    const std::size_t real_cols = clusters.size();
    const std::size_t rows = r.true_labels.size();
    std::vector<std::int64_t> col_sum(real_cols, 0);
    std::vector<std::int64_t> row_sum(rows, 0);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            row_sum[i] += r.confusion[i][j];
            if (j < real_cols) col_sum[j] += r.confusion[i][j];
        }
    }
    const double alpha = 1.0 / (2.0 * static_cast<double>(rows) + 2.0);
    const double beta = alpha * 1e-6;
    std::vector<std::vector<double>> w(rows, std::vector<double>(real_cols));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < real_cols; ++j) {
            const auto hit = static_cast<double>(r.confusion[i][j]);
            const double prec = col_sum[j] > 0 ? hit / static_cast<double>(col_sum[j]) : 0.0;
            const double rec = row_sum[i] > 0 ? hit / static_cast<double>(row_sum[i]) : 0.0;
            w[i][j] = hit + alpha * (prec + rec) + beta * prec;
        }
    }
    const auto match = max_weight_assignment(w);
    r.mapping.resize(r.true_labels.size());
    for (std::size_t i = 0; i < match.size(); ++i) {
        if (match[i] >= 0) r.mapping[i] = static_cast<std::size_t>(match[i]);
    }
    fill_metrics(r, pred.size());
    return r;
}

EvalReport evaluate_named(const std::vector<std::string>& pred, const std::vector<std::string>& truth) {
    if (pred.size() != truth.size()) {
        throw Error("LengthMismatch", kStage,
                    std::to_string(pred.size()) + " predictions vs " + std::to_string(truth.size()) + " labels");
    }
    EvalReport r;
    const std::set<std::string> true_set(truth.begin(), truth.end());
    r.true_labels.assign(true_set.begin(), true_set.end());
    std::set<std::string> pred_set(pred.begin(), pred.end());
    r.pred_labels = r.true_labels;
    for (const auto& p : pred_set) {
        if (!true_set.contains(p)) r.pred_labels.push_back(p);
    }
    std::map<std::string, std::size_t> col_of;
    for (std::size_t j = 0; j < r.pred_labels.size(); ++j) col_of[r.pred_labels[j]] = j;
    r.confusion.assign(r.true_labels.size(), std::vector<std::int64_t>(r.pred_labels.size(), 0));
    for (std::size_t i = 0; i < pred.size(); ++i) ++r.confusion[col_of[truth[i]]][col_of[pred[i]]];
    r.mapping.resize(r.true_labels.size());
    for (std::size_t i = 0; i < r.true_labels.size(); ++i) r.mapping[i] = i;
    fill_metrics(r, pred.size());
    return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json mapping = nlohmann::json::object();
    for (std::size_t i = 0; i < r.true_labels.size(); ++i) {
        mapping[r.true_labels[i]] = r.mapping[i] ? nlohmann::json(r.pred_labels[*r.mapping[i]]) : nlohmann::json(nullptr);
    }
    return {{"true_labels", r.true_labels}, {"pred_labels", r.pred_labels}, {"confusion", r.confusion},
            {"mapping", mapping},           {"precision", r.precision},     {"recall", r.recall},
            {"f1", r.f1},                   {"accuracy", r.accuracy}};
}

std::string confusion_table(const EvalReport& r) {
    std::size_t w0 = 5;
    for (const auto& t : r.true_labels) w0 = std::max(w0, t.size());
    std::size_t wc = 6;
    for (const auto& p : r.pred_labels) wc = std::max(wc, p.size() + 1);
    for (const auto& row : r.confusion) {
        for (auto v : row) wc = std::max(wc, std::to_string(v).size() + 1);
    }
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(w0)) << "true" << std::right;
    for (const auto& p : r.pred_labels) os << std::setw(static_cast<int>(wc)) << p;
    os << '\n';
    for (std::size_t i = 0; i < r.true_labels.size(); ++i) {
        os << std::left << std::setw(static_cast<int>(w0)) << r.true_labels[i] << std::right;
        for (auto v : r.confusion[i]) os << std::setw(static_cast<int>(wc)) << v;
        os << '\n';
    }
    return os.str();
}

}  // namespace statescope::cluster
