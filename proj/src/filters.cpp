#include "painscope/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "painscope/error.hpp"
#include "painscope/spectral.hpp"

namespace painscope {
namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> odd_extend(std::span<const double> x, std::size_t padlen) {
  const std::size_t n = x.size();
  std::vector<double> ext(n + 2 * padlen);
  for (std::size_t i = 0; i < padlen; ++i) ext[i] = 2.0 * x[0] - x[padlen - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(padlen));
  for (std::size_t i = 0; i < padlen; ++i) ext[padlen + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  return ext;
}

}  // namespace

std::vector<double> design_highpass_fir(double cutoff_hz, double fs_hz, std::size_t taps) {
  if (taps % 2 == 0 || taps < 3) throw Error(ErrorKind::InvalidArgument, "FIR taps must be odd and >= 3");
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs_hz / 2)) throw Error(ErrorKind::InvalidArgument, "cutoff outside (0, fs/2)");
  const double fc = cutoff_hz / fs_hz;
  const auto mid = static_cast<std::ptrdiff_t>(taps / 2);
  std::vector<double> lp(taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const auto k = static_cast<double>(static_cast<std::ptrdiff_t>(i) - mid);
    const double sinc = k == 0.0 ? 2.0 * fc : std::sin(2.0 * kPi * fc * k) / (kPi * k);
    const double window = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(taps - 1));
    lp[i] = sinc * window;
    sum += lp[i];
  }
  // Unit DC gain for the low-pass makes the high-pass exactly zero at DC.
  std::vector<double> hp(taps);
  for (std::size_t i = 0; i < taps; ++i) hp[i] = -lp[i] / sum;
  hp[static_cast<std::size_t>(mid)] += 1.0;
  return hp;
}

std::vector<double> fir_filter(std::span<const double> x, std::span<const double> h, double initial) {
  const std::size_t n = x.size();
  const std::size_t m = h.size();
  std::vector<double> y(n, 0.0);
  if (n == 0 || m == 0) return y;
  if (m <= 64) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += h[k] * (k <= i ? x[i - k] : initial);
      y[i] = acc;
    }
    return y;
  }
  // Prepend m-1 samples of constant history, convolve, keep the aligned part.
  std::vector<double> ext(n + m - 1, initial);
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(m - 1));
  const auto full = fft_convolve(ext, h);
  for (std::size_t i = 0; i < n; ++i) y[i] = full[i + m - 1];
  return y;
}

std::vector<double> fir_filtfilt(std::span<const double> x, std::span<const double> h, std::size_t padlen) {
  if (x.size() <= padlen) throw Error(ErrorKind::SignalTooShort, "signal length must exceed padding");
  auto ext = odd_extend(x, padlen);
  auto fwd = fir_filter(ext, h, ext.front());
  std::reverse(fwd.begin(), fwd.end());
  auto bwd = fir_filter(fwd, h, fwd.front());
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + static_cast<std::ptrdiff_t>(padlen), bwd.begin() + static_cast<std::ptrdiff_t>(padlen + x.size())};
}

std::complex<double> Biquad::response(double freq_hz, double fs_hz) const {
  const auto z1 = std::polar(1.0, -2.0 * kPi * freq_hz / fs_hz);
  const auto z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

Biquad design_notch(double notch_hz, double q, double fs_hz) {
  if (!(notch_hz > 0.0 && notch_hz < fs_hz / 2)) throw Error(ErrorKind::InvalidArgument, "notch must lie in (0, fs/2)");
  if (!(q > 0.0)) throw Error(ErrorKind::InvalidArgument, "notch Q must be positive");
  const double w0 = 2.0 * kPi * notch_hz / fs_hz;
  const double bw = w0 / q;
  const double gain = 1.0 / (1.0 + std::tan(bw / 2.0));
  const double c = std::cos(w0);
  return Biquad{gain, -2.0 * gain * c, gain, -2.0 * gain * c, 2.0 * gain - 1.0};
}

namespace {

Sos butter(double cutoff_hz, double fs_hz, int order, bool highpass) {
  if (order < 2 || order % 2 != 0) throw Error(ErrorKind::InvalidArgument, "Butterworth order must be even");
  if (!(cutoff_hz > 0.0 && cutoff_hz < fs_hz / 2)) throw Error(ErrorKind::InvalidArgument, "cutoff outside (0, fs/2)");
  const double w0 = 2.0 * kPi * cutoff_hz / fs_hz;
  const double cw = std::cos(w0);
  const double sw = std::sin(w0);
  Sos sos;
  for (int k = 1; k <= order / 2; ++k) {
    const double theta = kPi * (2.0 * k - 1.0) / (2.0 * order);
    const double q = 1.0 / (2.0 * std::cos(theta));
    const double alpha = sw / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad s;
    if (highpass) {
      s.b0 = (1.0 + cw) / 2.0 / a0;
      s.b1 = -(1.0 + cw) / a0;
    } else {
      s.b0 = (1.0 - cw) / 2.0 / a0;
      s.b1 = (1.0 - cw) / a0;
    }
    s.b2 = s.b0;
    s.a1 = -2.0 * cw / a0;
    s.a2 = (1.0 - alpha) / a0;
    sos.push_back(s);
  }
  return sos;
}

}  // namespace

Sos design_butter_lowpass(double cutoff_hz, double fs_hz, int order) { return butter(cutoff_hz, fs_hz, order, false); }
Sos design_butter_highpass(double cutoff_hz, double fs_hz, int order) { return butter(cutoff_hz, fs_hz, order, true); }

std::complex<double> sos_response(const Sos& sos, double freq_hz, double fs_hz) {
  std::complex<double> h = 1.0;
  for (const auto& s : sos) h *= s.response(freq_hz, fs_hz);
  return h;
}

std::vector<double> sos_filter(const Sos& sos, std::span<const double> x, double initial) {
  std::vector<double> y(x.begin(), x.end());
  double level = initial;
  for (const auto& s : sos) {
    // Steady-state DF2T state for a constant input `level`.
    const double g = s.dc_gain();
    double z2 = (s.b2 - s.a2 * g) * level;
    double z1 = (s.b1 - s.a1 * g) * level + z2;
    for (auto& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    level *= g;
  }
  return y;
}

std::vector<double> sos_filtfilt(const Sos& sos, std::span<const double> x, std::size_t padlen) {
  if (x.size() < 2) throw Error(ErrorKind::SignalTooShort, "need at least 2 samples");
  padlen = std::min(padlen, x.size() - 1);
  auto ext = odd_extend(x, padlen);
  auto fwd = sos_filter(sos, ext, ext.front());
  std::reverse(fwd.begin(), fwd.end());
  auto bwd = sos_filter(sos, fwd, fwd.front());
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + static_cast<std::ptrdiff_t>(padlen), bwd.begin() + static_cast<std::ptrdiff_t>(padlen + x.size())};
}

std::size_t default_sos_padlen(const Sos& sos) { return 3 * (2 * sos.size() + 1); }

}  // namespace painscope
