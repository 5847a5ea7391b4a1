#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace painscope {

/// Real-input forward DFT of length `nfft` (input zero-padded or truncated),
/// returning nfft/2+1 bins. Plans are cached per length and reused across threads.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t nfft);

/// Full linear convolution via FFT.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

std::vector<double> hann_window(std::size_t n);  // periodic=false (symmetric)

struct WelchParams {
  double segment_seconds = 1.0;
  double overlap = 0.5;  // fraction of a segment
};

struct Spectrum {
  std::vector<double> freqs;
  std::vector<double> psd;  // one-sided density, units²/Hz
  std::size_t segments = 0;

  double df() const noexcept { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }
};

/// Welch PSD: Hann-tapered mean-detrended segments, one-sided density scaling.
/// The segment length is clamped to the signal length.
Spectrum welch_psd(std::span<const double> x, double fs, const WelchParams& params);

/// Single Hann-tapered mean-detrended periodogram, zero-padded to `nfft`.
Spectrum periodogram(std::span<const double> x, double fs, std::size_t nfft);

struct Band {
  std::string_view name;
  double lo_hz;
  double hi_hz;
};

/// Trapezoidal integral of psd over bins in [lo, hi]. When hi exceeds the
/// highest bin the band is clipped and `clipped` (if given) is set.
double band_power(const Spectrum& spectrum, const Band& band, bool* clipped = nullptr);

struct PeakInfo {
  double peak_hz = 0.0;
  double bandwidth_hz = 0.0;
  bool flat = false;
};

/// Argmax bin within the band; bandwidth is the contiguous run of bins around
/// the peak with psd >= peak/2 (−3 dB), times the bin spacing, clipped to the band.
PeakInfo peak_frequency(const Spectrum& spectrum, const Band& band);

/// Normalized Shannon entropy of the psd over all bins, in [0, 1].
/// `all_zero` is set for an all-zero psd (result 0).
double spectral_entropy(std::span<const double> psd, bool* all_zero = nullptr);

/// Mean magnitude-squared coherence over bins in [lo, hi] from Welch-averaged
/// cross/auto spectra. Throws TooFewSegments below 4 segments.
double coherence(std::span<const double> x, std::span<const double> y, double fs, const WelchParams& params,
                 double lo_hz, double hi_hz);

/// Per-bin magnitude-squared coherence (same estimator as `coherence`).
Spectrum coherence_spectrum(std::span<const double> x, std::span<const double> y, double fs,
                            const WelchParams& params);

}  // namespace painscope
