#include "painscope/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "painscope/error.hpp"

namespace painscope {
namespace {

// FFTW planning is not thread-safe; execution with new-array calls is.
struct PlanCache {
  std::mutex mutex;
  std::map<std::size_t, fftw_plan> forward;
  std::map<std::size_t, fftw_plan> inverse;

  ~PlanCache() {
    for (auto& [n, p] : forward) fftw_destroy_plan(p);
    for (auto& [n, p] : inverse) fftw_destroy_plan(p);
  }

  fftw_plan get(std::size_t n, bool inverse_dir) {
    std::lock_guard lock(mutex);
    auto& plans = inverse_dir ? inverse : forward;
    if (auto it = plans.find(n); it != plans.end()) return it->second;
    std::vector<double> re(n);
    std::vector<std::complex<double>> c(n / 2 + 1);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan p = inverse_dir
                      ? fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(c.data()), re.data(), flags)
                      : fftw_plan_dft_r2c_1d(static_cast<int>(n), re.data(), reinterpret_cast<fftw_complex*>(c.data()), flags);
    plans.emplace(n, p);
    return p;
  }
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

std::vector<std::complex<double>> rfft_inplace(std::vector<double>& buf) {
  const std::size_t n = buf.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_execute_dft_r2c(plan_cache().get(n, false), buf.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> rfftfreq(std::size_t nfft, double fs) {
  std::vector<double> f(nfft / 2 + 1);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(i) * fs / static_cast<double>(nfft);
  return f;
}

// One-sided density scaling of |X|² in place.
void one_sided_density(std::vector<double>& p, std::size_t nfft, double fs, double window_power) {
  const double scale = 1.0 / (fs * window_power);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool unpaired = i == 0 || (nfft % 2 == 0 && i == p.size() - 1);
    p[i] *= unpaired ? scale : 2.0 * scale;
  }
}

struct SegmentPlan {
  std::size_t length;
  std::size_t step;
  std::size_t count;
};

SegmentPlan plan_segments(std::size_t n, double fs, const WelchParams& params) {
  if (n < 2) throw Error(ErrorKind::SignalTooShort, "spectral estimate needs at least 2 samples");
  auto length = static_cast<std::size_t>(std::llround(params.segment_seconds * fs));
  length = std::max<std::size_t>(length, 2);
  if (n < length)
    throw Error(ErrorKind::SignalTooShort,
                std::to_string(n) + " samples, shorter than one " + std::to_string(length) + "-sample segment");
  const auto overlap = static_cast<std::size_t>(std::llround(params.overlap * static_cast<double>(length)));
  const std::size_t step = std::max<std::size_t>(1, length - std::min(overlap, length - 1));
  return {length, step, (n - length) / step + 1};
}

void detrended_tapered(std::span<const double> seg, std::span<const double> window, std::vector<double>& out) {
  const double mean = std::accumulate(seg.begin(), seg.end(), 0.0) / static_cast<double>(seg.size());
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < seg.size(); ++i) out[i] = (seg[i] - mean) * window[i];
}

}  // namespace

std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t nfft) {
  std::vector<double> buf(nfft, 0.0);
  std::copy_n(x.begin(), std::min(nfft, x.size()), buf.begin());
  return rfft_inplace(buf);
}

std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  std::size_t nfft = 1;
  while (nfft < out_len) nfft <<= 1;
  auto fa = rfft(a, nfft);
  const auto fb = rfft(b, nfft);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> out(nfft);
  fftw_execute_dft_c2r(plan_cache().get(nfft, true), reinterpret_cast<fftw_complex*>(fa.data()), out.data());
  out.resize(out_len);
  for (auto& v : out) v /= static_cast<double>(nfft);
  return out;
}

std::vector<double> hann_window(std::size_t n) {
  // Periodic Hann, the usual choice for spectral averaging.
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

Spectrum welch_psd(std::span<const double> x, double fs, const WelchParams& params) {
  const auto plan = plan_segments(x.size(), fs, params);
  const auto window = hann_window(plan.length);
  const double wpow = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);

  Spectrum s;
  s.freqs = rfftfreq(plan.length, fs);
  s.psd.assign(s.freqs.size(), 0.0);
  s.segments = plan.count;
  std::vector<double> buf(plan.length);
  for (std::size_t k = 0; k < plan.count; ++k) {
    detrended_tapered(x.subspan(k * plan.step, plan.length), window, buf);
    const auto spec = rfft_inplace(buf);
    for (std::size_t i = 0; i < spec.size(); ++i) s.psd[i] += std::norm(spec[i]);
  }
  for (auto& v : s.psd) v /= static_cast<double>(plan.count);
  one_sided_density(s.psd, plan.length, fs, wpow);
  return s;
}

Spectrum periodogram(std::span<const double> x, double fs, std::size_t nfft) {
  if (x.size() < 2) throw Error(ErrorKind::SignalTooShort, "periodogram needs at least 2 samples");
  nfft = std::max(nfft, x.size());
  const auto window = hann_window(x.size());
  const double wpow = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);
  std::vector<double> buf(nfft, 0.0);
  detrended_tapered(x, window, buf);
  const auto spec = rfft_inplace(buf);
  Spectrum s;
  s.freqs = rfftfreq(nfft, fs);
  s.psd.resize(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) s.psd[i] = std::norm(spec[i]);
  one_sided_density(s.psd, nfft, fs, wpow);
  s.segments = 1;
  return s;
}

double band_power(const Spectrum& spectrum, const Band& band, bool* clipped) {
  const auto& f = spectrum.freqs;
  const auto& p = spectrum.psd;
  if (f.empty()) return 0.0;
  if (band.lo_hz >= f.back())
    throw Error(ErrorKind::BandAboveNyquist, std::string(band.name) + " band starts above Nyquist");
  const double hi = std::min(band.hi_hz, f.back());
  if (clipped != nullptr) *clipped = band.hi_hz > f.back();
  double acc = 0.0;
  bool have_prev = false;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] < band.lo_hz || f[i] > hi) continue;
    if (have_prev) acc += 0.5 * (p[i] + p[i - 1]) * (f[i] - f[i - 1]);
    have_prev = true;
  }
  return acc;
}

PeakInfo peak_frequency(const Spectrum& spectrum, const Band& band) {
  const auto& f = spectrum.freqs;
  const auto& p = spectrum.psd;
  std::size_t first = f.size();
  std::size_t last = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] >= band.lo_hz && f[i] <= band.hi_hz) {
      first = std::min(first, i);
      last = i;
    }
  }
  const double hi = std::min(band.hi_hz, f.empty() ? band.hi_hz : f.back());
  PeakInfo flat{0.5 * (band.lo_hz + hi), hi - band.lo_hz, true};
  if (first >= f.size() || last - first + 1 < 3) return flat;

  std::size_t peak = first;
  double lo_val = p[first];
  for (std::size_t i = first; i <= last; ++i) {
    if (p[i] > p[peak]) peak = i;
    lo_val = std::min(lo_val, p[i]);
  }
  const double top = p[peak];
  if (!(top > 0.0) || top - lo_val <= 1e-12 * top) return flat;

  const double half = top / 2.0;
  std::size_t left = peak;
  while (left > first && p[left - 1] >= half) --left;
  std::size_t right = peak;
  while (right < last && p[right + 1] >= half) ++right;
  const double width = static_cast<double>(right - left + 1) * spectrum.df();
  return {f[peak], std::min(width, hi - band.lo_hz), false};
}

double spectral_entropy(std::span<const double> psd, bool* all_zero) {
  if (psd.size() < 2) throw Error(ErrorKind::InvalidArgument, "spectral entropy needs at least 2 bins");
  const double total = std::accumulate(psd.begin(), psd.end(), 0.0);
  if (all_zero != nullptr) *all_zero = !(total > 0.0);
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double v : psd) {
    const double q = v / total;
    if (q > 0.0) h -= q * std::log(q);
  }
  return h / std::log(static_cast<double>(psd.size()));
}

Spectrum coherence_spectrum(std::span<const double> x, std::span<const double> y, double fs,
                            const WelchParams& params) {
  if (x.size() != y.size()) throw Error(ErrorKind::InvalidArgument, "coherence inputs differ in length");
  const auto plan = plan_segments(x.size(), fs, params);
  if (plan.count < 4)
    throw Error(ErrorKind::TooFewSegments, std::to_string(plan.count) + " Welch segments, need >= 4");
  const auto window = hann_window(plan.length);
  const std::size_t nb = plan.length / 2 + 1;
  std::vector<double> sxx(nb, 0.0), syy(nb, 0.0);
  std::vector<std::complex<double>> sxy(nb, 0.0);
  std::vector<double> bx(plan.length), by(plan.length);
  for (std::size_t k = 0; k < plan.count; ++k) {
    detrended_tapered(x.subspan(k * plan.step, plan.length), window, bx);
    detrended_tapered(y.subspan(k * plan.step, plan.length), window, by);
    const auto fx = rfft_inplace(bx);
    const auto fy = rfft_inplace(by);
    for (std::size_t i = 0; i < nb; ++i) {
      sxx[i] += std::norm(fx[i]);
      syy[i] += std::norm(fy[i]);
      sxy[i] += std::conj(fx[i]) * fy[i];
    }
  }
  Spectrum out;
  out.freqs = rfftfreq(plan.length, fs);
  out.psd.resize(nb);
  out.segments = plan.count;
  for (std::size_t i = 0; i < nb; ++i) {
    const double denom = sxx[i] * syy[i];
    out.psd[i] = denom > 0.0 ? std::norm(sxy[i]) / denom : 0.0;
  }
  return out;
}

double coherence(std::span<const double> x, std::span<const double> y, double fs, const WelchParams& params,
                 double lo_hz, double hi_hz) {
  const auto c = coherence_spectrum(x, y, fs, params);
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.freqs.size(); ++i) {
    if (c.freqs[i] >= lo_hz && c.freqs[i] <= hi_hz) {
      acc += c.psd[i];
      ++n;
    }
  }
  return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace painscope
