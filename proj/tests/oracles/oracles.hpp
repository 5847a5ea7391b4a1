#pragma once
// Independent reference implementations used only by tests. Each one is the
// slow, obvious version of a production kernel and shares no code with it.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

Vec sine(double freq_hz, double fs_hz, std::size_t n, double amplitude = 1.0, double phase = 0.0);
Vec gaussian_noise(std::size_t n, std::uint64_t seed, double sd = 1.0);

/// Least-squares fit of a·sin + b·cos + c at a known frequency; returns amplitude.
double fit_sinusoid_amplitude(std::span<const double> x, double freq_hz, double fs_hz, std::size_t trim = 0);

/// |H(e^{jω})| of an FIR kernel by direct DTFT summation.
double fir_magnitude(std::span<const double> h, double freq_hz, double fs_hz);

/// Biquad magnitude by evaluating the rational transfer function on the unit circle.
double biquad_magnitude(double b0, double b1, double b2, double a1, double a2, double freq_hz, double fs_hz);

/// O(N²) sample entropy: Chebyshev distance, self-matches excluded, N−m templates.
double sample_entropy(std::span<const double> x, int m, double r);

/// Higuchi fractal dimension by explicit curve-length sums and a textbook regression.
double higuchi_fd(std::span<const double> x, int kmax);

/// Periodic db4 analysis pyramid by explicit matrix–vector products.
struct Pyramid {
  std::vector<Vec> details;
  Vec approximation;
};
Pyramid db4_pyramid(std::span<const double> x, int levels, std::span<const double> lowpass);

/// Trapezoid integral of psd over all bins.
double integrate(std::span<const double> freqs, std::span<const double> psd);

/// Mean and population SD.
double mean(std::span<const double> x);
double population_sd(std::span<const double> x);

/// Parsed header fields, by a regex-free line scanner written for tests.
struct HeaderFields {
  std::map<std::string, std::map<std::string, std::string>> sections;
};
HeaderFields scan_ini(const std::string& text);

/// Dual objective ½αᵀQα − Σα minimized by projected gradient onto
/// {0 ≤ α ≤ C, yᵀα = 0}; the projection bisects on the equality multiplier.
struct QpResult {
  Vec alpha;
  double objective = 0.0;
};
QpResult svm_dual_projected_gradient(const std::vector<Vec>& kernel, std::span<const double> y, double c,
                                     std::size_t iterations = 200000);

/// Linear solve by Gaussian elimination with partial pivoting.
Vec solve(std::vector<Vec> a, Vec b);

}  // namespace oracle
