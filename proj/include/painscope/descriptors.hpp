#pragma once

// Time-domain, complexity and wavelet descriptors of a single-channel series.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "painscope/parallel.hpp"

namespace painscope {

struct TimeStats {
  double mean = 0, sd = 0, skewness = 0, kurtosis = 0, zero_crossing_rate = 0, peak_to_peak = 0;
  bool zero_variance = false;
};

/// Population moments; kurtosis is non-excess (Gaussian → 3). Zero-crossing
/// rate counts sign changes of the mean-removed series per second.
TimeStats time_stats(std::span<const double> x, double fs_hz);

struct Hjorth {
  double activity = 0, mobility = 0, complexity = 0;
  bool zero_variance = false;
};

Hjorth hjorth(std::span<const double> x);

struct EntropyResult {
  double value = 0.0;
  bool sentinel = false;  // no (m+1)-matches; value is the log of the pair count
};

/// Sample entropy with tolerance r = r_factor × SD(x), Chebyshev distance,
/// self-matches excluded, N−m templates for both lengths. Exact counts via
/// sorted-template pruning.
EntropyResult sample_entropy(std::span<const double> x, int m = 2, double r_factor = 0.2,
                             ExecPolicy policy = ExecPolicy::Parallel);

struct FractalResult {
  double value = 0.0;
  bool degenerate = false;
};

/// Higuchi fractal dimension: least-squares slope of log L(k) against log(1/k), k = 1..kmax.
FractalResult higuchi_fd(std::span<const double> x, int kmax = 10);

/// Daubechies-4 (8-tap) analysis filters, orthonormal.
const std::array<double, 8>& db4_lowpass();
std::array<double, 8> db4_highpass();

struct WaveletDecomposition {
  std::vector<std::vector<double>> details;  // level 1..L
  std::vector<double> approximation;         // level L
  std::size_t padded_length = 0;
};

/// Periodic-extension pyramid. The input is zero-padded to a multiple of 2^levels.
WaveletDecomposition dwt_db4(std::span<const double> x, int levels = 4);

/// Mean |coefficient| of details 1..L followed by the level-L approximation.
std::vector<double> dwt_energies(std::span<const double> x, int levels = 4);

}  // namespace painscope
