// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <httplib.h>
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "statescope/cluster.hpp"
#include "statescope/dsp.hpp"
#include "statescope/embed.hpp"
#include "statescope/features.hpp"
#include "statescope/fsm.hpp"
#include "statescope/pipeline.hpp"
#include "statescope/server.hpp"
#include "statescope/store.hpp"
#include "statescope/synth.hpp"
#include "statescope/verify.hpp"
#include "tempdir.hpp"

using namespace statescope;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& why) {
        if (!ok) {
            if (pass) detail << "first failure: " << why << "; ";
            pass = false;
        }
    }
};

std::string fixed(double v, int digits = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::string> annotations(const Session& s) {
    std::vector<std::string> out;
    for (const auto& w : s.windows) out.push_back(*w.annotation);
    return out;
}

Session simulate(const synth::GroundTruthDevice& d, const synth::ScenarioScript& script, std::uint64_t seed, double noise) {
    synth::SimOptions o;
    o.noise_scale = noise;
    return synth::simulate(d, script, 1000, seed, o);
}

// Every KL pair produced by an acceptance t-SNE run, checked by criterion 6.
std::vector<std::pair<double, double>> g_kl;

void record_kl(const pipeline::PipelineResult& r) {
    if (r.embedding) g_kl.emplace_back(r.embedding->kl_initial, r.embedding->kl_final);
}

double cluster_f1(const Session& s, const pipeline::PipelineConfig& c) {
    const auto r = pipeline::run_pipeline(s, c);
    record_kl(r);
    return cluster::evaluate(r.clusters.labels, annotations(s)).f1;
}

// 1. Voice-kit: DBSCAN + auto_eps on t-SNE, F1 >= 0.90, < 60 s per seed.
Outcome voice_kit() {
    Outcome o;
    const auto device = synth::voice_kit_fixture();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto s = simulate(device, synth::voice_kit_protocol(100, 1000), seed, 1.0);
        pipeline::PipelineConfig c;
        c.seed = seed;
        const auto r = pipeline::run_pipeline(s, c);
        record_kl(r);
        const auto report = cluster::evaluate(r.clusters.labels, annotations(s));
        const auto holdout = verify::train_session(s, seed).holdout;
        const double secs = seconds_since(t0);
        o.detail << "seed " << seed << ": F1 " << fixed(report.f1) << " k=" << r.clusters.k << " holdout "
                 << fixed(holdout.accuracy) << " " << fixed(secs, 1) << "s; ";
        o.require(report.f1 >= 0.90, "F1 below 0.90 on seed " + std::to_string(seed));
        o.require(secs < 60.0, "runtime over 60 s on seed " + std::to_string(seed));
    }
    return o;
}

// 2. Vision-kit: fused features beat the best single modality by >= 0.05.
Outcome vision_fusion() {
    Outcome o;
    const auto device = synth::vision_kit_fixture();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto s = simulate(device, synth::vision_kit_protocol(100, 1000), seed, 1.0);
        pipeline::PipelineConfig c;
        c.seed = seed;
        const double fused = cluster_f1(s, c);
        double best = 0.0;
        for (auto m : {features::Modality::Power, features::Modality::Network, features::Modality::Emanation}) {
            auto single = c;
            single.modality = m;
            best = std::max(best, cluster_f1(s, single));
        }
        o.detail << "seed " << seed << ": fused " << fixed(fused) << " best single " << fixed(best) << "; ";
        o.require(fused - best >= 0.05, "gain below 0.05 on seed " + std::to_string(seed));
    }
    return o;
}

// 3. Nine statistics vs the naive reference, 1e-9 on 1000 random series.
Outcome feature_oracle() {
    Outcome o;
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto x = oracle::random_series(rng);
        const auto got = features::stat_features(x);
        const auto want = oracle::naive_stats(x);
        for (std::size_t s = 0; s < 9; ++s) {
            const double err = std::abs(got[s] - want[s]) / std::max(1.0, std::abs(want[s]));
            worst = std::max(worst, err);
        }
    }
    o.detail << "1000 series, worst scaled error " << worst;
    o.require(worst <= 1e-9, "error above 1e-9");
    return o;
}

// 4. FFT round trip 1e-9, Parseval 1e-6, square-wave harmonics within 2%.
Outcome fft_checks() {
    Outcome o;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 3.0);
    double worst_rt = 0.0;
    double worst_parseval = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = std::size_t{1} << (trial % 11);
        std::vector<dsp::Complex> x(n);
        double peak = 0.0;
        for (auto& v : x) {
            v = {g(rng), g(rng)};
            peak = std::max(peak, std::abs(v));
        }
        const auto spec = dsp::fft(std::span<const dsp::Complex>(x));
        const auto back = dsp::ifft(spec);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(back[i] - x[i]));
        worst_rt = std::max(worst_rt, err / std::max(1.0, peak));
        double time_energy = 0.0;
        double freq_energy = 0.0;
        for (const auto& v : x) time_energy += std::norm(v);
        for (const auto& v : spec.values) freq_energy += std::norm(v);
        freq_energy /= static_cast<double>(n);
        worst_parseval = std::max(worst_parseval, std::abs(time_energy - freq_energy) / time_energy);
    }
    const auto wave = dsp::square_wave({10.0, 5, 1024.0, 1024});
    const auto s = dsp::fft(std::span<const double>(wave), 1024.0);
    const double fundamental = std::abs(s.values[10]);
    double worst_ratio = 0.0;
    for (int k = 1; k <= 5; ++k) {
        const double want = 1.0 / (2 * k - 1);
        const double ratio = std::abs(s.values[static_cast<std::size_t>(10 * (2 * k - 1))]) / fundamental;
        worst_ratio = std::max(worst_ratio, std::abs(ratio - want) / want);
    }
    o.detail << "round trip " << worst_rt << ", Parseval " << worst_parseval << ", harmonic ratio " << fixed(100.0 * worst_ratio, 4)
             << "%";
    o.require(worst_rt <= 1e-9, "round trip above 1e-9");
    o.require(worst_parseval <= 1e-6, "Parseval above 1e-6");
    o.require(worst_ratio <= 0.02, "harmonic ratio off by more than 2%");
    return o;
}

// 5. GMM log-likelihood and k-means inertia monotone on 100 datasets.
Outcome em_monotonic() {
    Outcome o;
    std::mt19937_64 rng(5);
    double worst_ll_drop = 0.0;
    double worst_inertia_rise = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto pts = oracle::random_points(30 + trial, 1 + trial % 4, rng);
        const int k = 1 + trial % 5;
        const auto g = cluster::gmm(pts, k, static_cast<std::uint64_t>(trial));
        for (std::size_t i = 1; i < g.log_likelihood_history.size(); ++i) {
            worst_ll_drop = std::max(worst_ll_drop, g.log_likelihood_history[i - 1] - g.log_likelihood_history[i]);
        }
        const auto km = cluster::kmeans(pts, k, static_cast<std::uint64_t>(trial));
        const auto& h = km.inertia_history;
        // Relative 1e-12 absorbs summation order only.
        for (std::size_t i = 1; i < h.size(); ++i) worst_inertia_rise = std::max(worst_inertia_rise, (h[i] - h[i - 1]) / std::max(1.0, h[i - 1]));
    }
    o.detail << "100 datasets, largest LL drop " << worst_ll_drop << ", largest relative inertia rise " << worst_inertia_rise;
    o.require(worst_ll_drop <= 1e-8, "log-likelihood decreased");
    o.require(worst_inertia_rise <= 1e-12, "inertia increased");
    return o;
}

// 6. Calibration entropy, KL never worse than the start, three blobs apart.
Outcome tsne_checks() {
    Outcome o;
    std::mt19937_64 rng(6);
    std::exponential_distribution<double> e(0.3);
    double worst_entropy = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 5 + static_cast<std::size_t>(trial % 120);
        std::vector<double> d(n);
        for (auto& v : d) v = e(rng) * e(rng);
        const double perplexity = std::uniform_real_distribution<double>(2.0, 0.8 * static_cast<double>(n))(rng);
        const auto cal = embed::calibrate_row(d, perplexity);
        double h = 0.0;
        for (double p : cal.probabilities) {
            if (p > 0.0) h -= p * std::log2(p);
        }
        worst_entropy = std::max(worst_entropy, std::abs(h - std::log2(perplexity)));
    }
    int separated = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::vector<int> truth;
        const auto pts = oracle::blobs(3, 10, 27, 50.0, 1.0, 100 + seed, &truth);
        embed::TsneConfig c;
        c.seed = seed;
        const auto emb = embed::tsne(pts, c);
        g_kl.emplace_back(emb.kl_initial, emb.kl_final);
        double intra = 0.0;
        double inter = 1e300;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const double dd = std::hypot(emb.points[i][0] - emb.points[j][0], emb.points[i][1] - emb.points[j][1]);
                if (truth[i] == truth[j]) {
                    intra = std::max(intra, dd);
                } else {
                    inter = std::min(inter, dd);
                }
            }
        }
        separated += intra < inter ? 1 : 0;
    }
    std::size_t kl_ok = 0;
    for (const auto& [before, after] : g_kl) kl_ok += after <= before ? 1 : 0;
    o.detail << "entropy error " << worst_entropy << "; KL decreased on " << kl_ok << "/" << g_kl.size() << " runs; blobs separated on "
             << separated << "/5 seeds";
    o.require(worst_entropy <= 1e-4, "entropy off by more than 1e-4");
    o.require(kl_ok == g_kl.size(), "kl_final above kl_initial");
    o.require(separated == 5, "blob separation failed");
    return o;
}

// 7. Correlation rows sum to one within 1e-12.
Outcome correlation_rows() {
    Outcome o;
    std::mt19937_64 rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 500;
        std::vector<std::string> ann(n);
        std::vector<int> cl(n);
        for (std::size_t i = 0; i < n; ++i) {
            ann[i] = "s" + std::to_string(rng() % 8);
            cl[i] = static_cast<int>(rng() % 7) - 1;
        }
        const auto m = fsm::correlation_matrix(ann, cl);
        for (const auto& row : m.cells) {
            double sum = 0.0;
            for (double v : row) sum += v;
            worst = std::max(worst, std::abs(sum - 1.0));
        }
    }
    o.detail << "100 pairings, worst row-sum error " << worst;
    o.require(worst <= 1e-12, "row sum off by more than 1e-12");
    return o;
}

// 8. Merging per-interaction labels recovers the oracle state count.
Outcome merge_recovers_states() {
    Outcome o;
    const auto device = synth::voice_kit_fixture();
    o.require(synth::is_event_deterministic(device), "voice fixture is not event-deterministic");
    int runs = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (const auto& script : {synth::voice_kit_protocol(20, 1000, 4), synth::random_script(device, 80, 1, 3, 1000, seed)}) {
            const auto truth = simulate(device, script, seed, 1.0);
            const auto s = synth::per_interaction_labels(truth);
            const auto merged = fsm::merge_by_transition_event(fsm::build_fsm(s), s);
            const auto ann = annotations(truth);
            const std::set<std::string> visited(ann.begin(), ann.end());
            o.require(merged.fsm.states.size() == visited.size(),
                      "seed " + std::to_string(seed) + ": " + std::to_string(merged.fsm.states.size()) + " states vs " +
                          std::to_string(visited.size()));
            ++runs;
        }
    }
    o.detail << runs << " sessions, oracle has " << device.states.size() << " states";
    return o;
}

// 9. Step-wise verification: noiseless replay exact, noisy replay >= 95%.
Outcome stepwise() {
    Outcome o;
    const auto device = synth::voice_kit_fixture();
    for (double noise : {0.0, 1.0}) {
        double worst = 1.0;
        std::size_t invalid = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto train_s = simulate(device, synth::voice_kit_protocol(100, 1000), seed, noise);
            const auto model = verify::train_session(train_s, seed);
            const auto machine = fsm::build_fsm(train_s);
            const auto replay = simulate(device, synth::random_script(device, 60, 1, 4, 1000, 500 + seed), 500 + seed, noise);
            const auto steps = verify::stepwise_verify(model.classifier, machine, replay);
            std::size_t correct = 0;
            for (std::size_t i = 0; i < steps.size(); ++i) {
                correct += steps[i].predicted == *replay.windows[i].annotation ? 1 : 0;
                invalid += steps[i].transition_valid ? 0 : 1;
            }
            worst = std::min(worst, static_cast<double>(correct) / static_cast<double>(steps.size()));
        }
        if (noise == 0.0) {
            o.detail << "noiseless: worst accuracy " << fixed(worst) << ", invalid transitions " << invalid << "; ";
            o.require(worst == 1.0, "noiseless replay below 100%");
            o.require(invalid == 0, "noiseless replay has invalid transitions");
        } else {
            o.detail << "noisy: worst accuracy " << fixed(worst) << "; ";
            o.require(worst >= 0.95, "noisy replay below 95%");
        }
    }
    return o;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + STATESCOPE_CLI + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> artifact_files(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) out[entry.path().filename().string()] = read_file(entry.path().string());
    return out;
}

// 10. Same session + config + seed: identical artifacts via CLI twice and via the API.
Outcome determinism() {
    Outcome o;
    oracle::TempDir cli_a;
    oracle::TempDir cli_b;
    oracle::TempDir api;
    const std::string id = "synth-voice-kit-11";
    const std::string flags = "pipeline --session-id " + id + " --seed 5";
    for (const auto* d : {&cli_a, &cli_b}) {
        o.require(run_cli("--session-dir \"" + d->str() + "\" synth --seed 11 --windows-per-state 40") == 0, "CLI synth failed");
        o.require(run_cli("--session-dir \"" + d->str() + "\" " + flags) == 0, "CLI pipeline failed");
    }
    if (!o.pass) return o;

    store::SessionStore st(api.path());
    httplib::Server http;
    server::install_routes(http, st);
    const int port = http.bind_to_any_port("127.0.0.1");
    std::thread serving([&] { http.listen_after_bind(); });
    http.wait_until_ready();
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(300, 0);
    const auto session = read_file((cli_a.path() / id / "session.json").string());
    auto created = client.Post("/sessions", json{{"session_id", id}}.dump(), "application/json");
    auto ingested = client.Post("/sessions/" + id + "/ingest", json{{"session", json::parse(session)}}.dump(), "application/json");
    auto ran = client.Post("/sessions/" + id + "/pipeline", R"({"seed":5})", "application/json");
    http.stop();
    serving.join();
    o.require(created && created->status == 201, "API create failed");
    o.require(ingested && ingested->status == 200, "API ingest failed");
    o.require(ran && ran->status == 200, "API pipeline failed");
    if (!o.pass) return o;

    const auto a = artifact_files(cli_a.path() / id / "artifacts");
    const auto b = artifact_files(cli_b.path() / id / "artifacts");
    const auto c = artifact_files(api.path() / id / "artifacts");
    o.require(a.size() >= 6, "missing artifacts");
    o.require(a == b, "CLI reruns differ");
    o.require(a == c, "API artifacts differ from CLI artifacts");
    std::size_t bytes = 0;
    for (const auto& [name, text] : a) bytes += text.size();
    o.detail << a.size() << " artifacts (" << bytes << " bytes) identical across CLI, CLI rerun and API";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"voice-kit clustering F1 >= 0.90, < 60 s, 5 seeds", voice_kit},
        {"vision-kit fusion gain >= 0.05", vision_fusion},
        {"nine statistics match naive oracle within 1e-9", feature_oracle},
        {"FFT round trip, Parseval, square-wave harmonics", fft_checks},
        {"GMM log-likelihood and k-means inertia monotone", em_monotonic},
        {"t-SNE calibration, KL decrease, blob separation", tsne_checks},
        {"correlation rows sum to 1", correlation_rows},
        {"merge recovers oracle state count", merge_recovers_states},
        {"step-wise verification accuracy", stepwise},
        {"byte-identical artifacts via CLI and API", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "threw: " << e.what();
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << " [" << o.detail.str() << "] ("
                  << fixed(seconds_since(t0), 1) << "s)" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
