#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace painscope {

/// Linear-phase high-pass: Hamming-windowed sinc low-pass subtracted from a
/// unit impulse. `taps` must be odd.
std::vector<double> design_highpass_fir(double cutoff_hz, double fs_hz, std::size_t taps);

/// Linear convolution y[n] = Σ h[k]·x[n-k], with samples before the start
/// assumed equal to `initial` (steady state for a constant history).
/// Uses FFT overlap for long kernels.
std::vector<double> fir_filter(std::span<const double> x, std::span<const double> h, double initial);

/// Forward-backward FIR over an odd-reflection extension of `padlen` samples.
std::vector<double> fir_filtfilt(std::span<const double> x, std::span<const double> h, std::size_t padlen);

/// Second-order section, direct form II transposed, a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  std::complex<double> response(double freq_hz, double fs_hz) const;
  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

using Sos = std::vector<Biquad>;

/// Second-order IIR notch with -3 dB bandwidth notch_hz / q.
Biquad design_notch(double notch_hz, double q, double fs_hz);
/// Butterworth sections (bilinear transform with prewarping). `order` even.
Sos design_butter_lowpass(double cutoff_hz, double fs_hz, int order);
Sos design_butter_highpass(double cutoff_hz, double fs_hz, int order);

std::complex<double> sos_response(const Sos& sos, double freq_hz, double fs_hz);

/// Causal cascade with steady-state initial conditions scaled by `initial`.
std::vector<double> sos_filter(const Sos& sos, std::span<const double> x, double initial);

/// Forward-backward cascade over an odd-reflection extension of `padlen`
/// samples (clamped to size-1).
std::vector<double> sos_filtfilt(const Sos& sos, std::span<const double> x, std::size_t padlen);

/// Default padding used by the offline path: 3 × (2·sections + 1).
std::size_t default_sos_padlen(const Sos& sos);

}  // namespace painscope
