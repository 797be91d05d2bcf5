#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace statescope::dsp {

using Complex = std::complex<double>;

struct Spectrum {
    double bin_hz = 1.0;
    std::vector<Complex> values;
};

struct Peak {
    std::size_t bin_index = 0;
    double freq_hz = 0.0;
    double psd = 0.0;
    bool operator==(const Peak&) const = default;
};

struct PeakSet {
    std::vector<Peak> peaks;  // ascending bin_index
    double noise_floor = 0.0;

    std::vector<std::size_t> bins() const;
};

struct IntRange {
    int lo = 0;
    int hi = 0;  // inclusive
};

/// Received emanation frequencies: p * carrier + q * clock + r * leak.
struct EmanationFrequencyModel {
    double f_carrier_hz = 0.0;
    double f_c_hz = 0.0;
    double f_l_hz = 0.0;
    IntRange p_range;
    IntRange q_range;
    IntRange r_range;
};

struct SquareWaveSpec {
    double f_hz = 0.0;
    int n_harmonics = 1;
    double sample_rate_hz = 0.0;
    std::size_t n_samples = 0;
};

std::size_t next_pow2(std::size_t n);

/// Unnormalized radix-2 DFT. Input is zero-padded to the next power of two.
Spectrum fft(std::span<const Complex> signal, double sample_rate_hz = 1.0);
Spectrum fft(std::span<const double> signal, double sample_rate_hz = 1.0);

/// Inverse of fft(), including the 1/N factor.
std::vector<Complex> ifft(const Spectrum& spectrum);

/// (4/pi) * sum_k sin(2 pi (2k-1) f t) / (2k-1), sampled at sample_rate_hz.
std::vector<double> square_wave(const SquareWaveSpec& spec);

/// Periodogram |X[k]|^2 / (L * fs) with fs = N * bin_hz. L is the number of
/// samples before zero-padding; 0 means the spectrum length N.
std::vector<double> psd(const Spectrum& spectrum, std::size_t window_length = 0);

std::vector<double> to_db(std::span<const double> linear_psd);

/// Local maxima above median + threshold_k * MAD, picked greedily by height
/// with at least min_separation_bins between accepted peaks.
PeakSet detect_peaks(std::span<const double> psd_values, std::size_t min_separation_bins = 2,
                     double threshold_k = 6.0, double bin_hz = 1.0);

/// Common difference of the least-squares arithmetic progression through
/// the peak frequencies.
double estimate_harmonic_spacing(const PeakSet& peaks);

std::vector<double> candidate_frequencies(const EmanationFrequencyModel& model);

/// Per-spectrum series of psd values at the reference peak bins.
std::vector<std::vector<double>> emanation_features(std::span<const std::vector<double>> psd_windows,
                                                     const PeakSet& reference_peaks);

/// Averaged periodogram over consecutive frames of `fft_size` IQ samples.
std::vector<double> averaged_psd(std::span<const Complex> iq, double sample_rate_hz, std::size_t fft_size);

}  // namespace statescope::dsp
