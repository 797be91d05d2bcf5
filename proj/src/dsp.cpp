#include "statescope/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "statescope/error.hpp"
#include "stats.hpp"

namespace statescope::dsp {

namespace {

constexpr const char* kStage = "dsp";

void fft_in_place(std::vector<Complex>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    // Twiddles are evaluated directly rather than by repeated multiplication
    // so the round-trip error stays near machine precision.
    std::vector<Complex> twiddle(n / 2);
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n / 2; ++k) {
        twiddle[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const Complex u = a[i + k];
                const Complex v = a[i + k + len / 2] * twiddle[k * stride];
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

}  // namespace

std::vector<std::size_t> PeakSet::bins() const {
    std::vector<std::size_t> out;
    out.reserve(peaks.size());
    for (const auto& p : peaks) out.push_back(p.bin_index);
    return out;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

Spectrum fft(std::span<const Complex> signal, double sample_rate_hz) {
    if (signal.empty()) throw Error("Empty", kStage, "fft of an empty signal");
    if (!(sample_rate_hz > 0.0)) throw Error("InvalidSampleRate", kStage, "sample rate must be positive");
    std::vector<Complex> a(next_pow2(signal.size()), Complex{});
    std::copy(signal.begin(), signal.end(), a.begin());
    fft_in_place(a, false);
    return Spectrum{sample_rate_hz / static_cast<double>(a.size()), std::move(a)};
}

Spectrum fft(std::span<const double> signal, double sample_rate_hz) {
    std::vector<Complex> c(signal.begin(), signal.end());
    return fft(std::span<const Complex>(c), sample_rate_hz);
}

std::vector<Complex> ifft(const Spectrum& spectrum) {
    if (spectrum.values.empty()) throw Error("Empty", kStage, "ifft of an empty spectrum");
    std::vector<Complex> a = spectrum.values;
    if (next_pow2(a.size()) != a.size()) throw Error("InvalidLength", kStage, "spectrum length is not a power of two");
    fft_in_place(a, true);
    const double scale = 1.0 / static_cast<double>(a.size());
    for (auto& v : a) v *= scale;
    return a;
}

std::vector<double> square_wave(const SquareWaveSpec& spec) {
    if (!(spec.f_hz > 0.0) || !(spec.sample_rate_hz > 0.0) || spec.n_harmonics < 1) {
        throw Error("InvalidSpec", kStage, "square wave needs f > 0, sample rate > 0, n_harmonics >= 1");
    }
    const double nyquist = spec.sample_rate_hz / 2.0;
    const double top = static_cast<double>(2 * spec.n_harmonics - 1) * spec.f_hz;
    // A top harmonic sitting exactly on Nyquist is accepted.
    if (top > nyquist * (1.0 + 1e-12)) {
        throw Error("AliasedHarmonic", kStage,
                    "harmonic " + std::to_string(2 * spec.n_harmonics - 1) + " at " + std::to_string(top) +
                        " Hz exceeds Nyquist " + std::to_string(nyquist) + " Hz");
    }
    std::vector<double> x(spec.n_samples, 0.0);
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        const double t = static_cast<double>(i) / spec.sample_rate_hz;
        double acc = 0.0;
        for (int k = 1; k <= spec.n_harmonics; ++k) {
            const double odd = 2.0 * k - 1.0;
            acc += std::sin(2.0 * std::numbers::pi * odd * spec.f_hz * t) / odd;
        }
        x[i] = 4.0 / std::numbers::pi * acc;
    }
    return x;
}

std::vector<double> psd(const Spectrum& spectrum, std::size_t window_length) {
    const auto n = static_cast<double>(spectrum.values.size());
    const double fs = n * spectrum.bin_hz;
    const double len = window_length == 0 ? n : static_cast<double>(window_length);
    std::vector<double> out;
    out.reserve(spectrum.values.size());
    for (const auto& v : spectrum.values) out.push_back(std::norm(v) / (len * fs));
    return out;
}

std::vector<double> to_db(std::span<const double> linear_psd) {
    std::vector<double> out;
    out.reserve(linear_psd.size());
    for (double v : linear_psd) out.push_back(10.0 * std::log10(std::max(v, 1e-30)));
    return out;
}

PeakSet detect_peaks(std::span<const double> psd_values, std::size_t min_separation_bins, double threshold_k,
                     double bin_hz) {
    if (psd_values.empty()) throw Error("Empty", kStage, "peak detection on an empty psd");
    PeakSet result;
    result.noise_floor = detail::median(psd_values) + threshold_k * detail::median_abs_deviation(psd_values);

    const std::size_t n = psd_values.size();
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = psd_values[i];
        if (!(v > result.noise_floor)) continue;
        const bool left_ok = i == 0 || v > psd_values[i - 1];
        const bool right_ok = i + 1 == n || v >= psd_values[i + 1];
        if (left_ok && right_ok) candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return psd_values[a] > psd_values[b]; });

    std::vector<std::size_t> accepted;
    for (std::size_t c : candidates) {
        const bool clear = std::none_of(accepted.begin(), accepted.end(), [&](std::size_t a) {
            const std::size_t gap = a > c ? a - c : c - a;
            return gap < min_separation_bins;
        });
        if (clear) accepted.push_back(c);
    }
    std::sort(accepted.begin(), accepted.end());
    for (std::size_t b : accepted) {
        result.peaks.push_back(Peak{b, static_cast<double>(b) * bin_hz, psd_values[b]});
    }
    return result;
}

double estimate_harmonic_spacing(const PeakSet& peaks) {
    const auto& p = peaks.peaks;
    if (p.size() < 2) throw Error("TooFewPeaks", kStage, "harmonic spacing needs at least two peaks");

    double spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < p.size(); ++i) {
        const double gap = p[i].freq_hz - p[i - 1].freq_hz;
        if (gap > 0.0) spacing = std::min(spacing, gap);
    }
    if (!std::isfinite(spacing)) throw Error("TooFewPeaks", kStage, "all peaks share one frequency");

    // Two passes: assign harmonic indices from the current spacing estimate,
    // then refit the progression by least squares.
    for (int pass = 0; pass < 2; ++pass) {
        std::vector<double> idx(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) idx[i] = std::round((p[i].freq_hz - p[0].freq_hz) / spacing);
        const double mi = std::accumulate(idx.begin(), idx.end(), 0.0) / static_cast<double>(idx.size());
        double mf = 0.0;
        for (const auto& pk : p) mf += pk.freq_hz;
        mf /= static_cast<double>(p.size());
        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            sxy += (idx[i] - mi) * (p[i].freq_hz - mf);
            sxx += (idx[i] - mi) * (idx[i] - mi);
        }
        if (sxx == 0.0) break;
        spacing = sxy / sxx;
    }
    return spacing;
}

std::vector<double> candidate_frequencies(const EmanationFrequencyModel& model) {
    for (const auto* r : {&model.p_range, &model.q_range, &model.r_range}) {
        if (r->lo > r->hi) throw Error("InvalidRange", kStage, "integer range is empty");
    }
    std::vector<double> out;
    for (int p = model.p_range.lo; p <= model.p_range.hi; ++p) {
        for (int q = model.q_range.lo; q <= model.q_range.hi; ++q) {
            for (int r = model.r_range.lo; r <= model.r_range.hi; ++r) {
                const double f = p * model.f_carrier_hz + q * model.f_c_hz + r * model.f_l_hz;
                if (f >= 0.0) out.push_back(f);
            }
        }
    }
    std::sort(out.begin(), out.end());
    auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); };
    out.erase(std::unique(out.begin(), out.end(), same), out.end());
    return out;
}

std::vector<std::vector<double>> emanation_features(std::span<const std::vector<double>> psd_windows,
                                                    const PeakSet& reference_peaks) {
    std::vector<std::vector<double>> out;
    out.reserve(psd_windows.size());
    for (const auto& w : psd_windows) {
        std::vector<double> series;
        series.reserve(reference_peaks.peaks.size());
        for (const auto& pk : reference_peaks.peaks) {
            if (pk.bin_index >= w.size()) {
                throw Error("BinOutOfRange", kStage,
                            "reference bin " + std::to_string(pk.bin_index) + " outside spectrum of " +
                                std::to_string(w.size()) + " bins");
            }
            series.push_back(w[pk.bin_index]);
        }
        out.push_back(std::move(series));
    }
    return out;
}

std::vector<double> averaged_psd(std::span<const Complex> iq, double sample_rate_hz, std::size_t fft_size) {
    if (iq.empty()) return {};
    fft_size = next_pow2(std::max<std::size_t>(fft_size, 1));
    std::vector<double> acc(fft_size, 0.0);
    std::size_t frames = 0;
    for (std::size_t start = 0; start < iq.size(); start += fft_size) {
        const std::size_t len = std::min(fft_size, iq.size() - start);
        std::vector<Complex> frame(fft_size, Complex{});
        std::copy_n(iq.begin() + static_cast<std::ptrdiff_t>(start), len, frame.begin());
        const auto spec = fft(std::span<const Complex>(frame), sample_rate_hz);
        const auto p = psd(spec, len);
        for (std::size_t k = 0; k < fft_size; ++k) acc[k] += p[k];
        ++frames;
    }
    for (auto& v : acc) v /= static_cast<double>(frames);
    return acc;
}

}  // namespace statescope::dsp
