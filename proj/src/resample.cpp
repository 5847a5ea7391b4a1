#include "painscope/resample.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "painscope/error.hpp"

namespace painscope {
namespace {

constexpr double kKaiserBeta = 7.0;
constexpr std::size_t kHalfLengthPerPhase = 32;

// Kaiser's empirical attenuation/transition relation for the chosen beta.
double transition_width_fraction(std::size_t taps) {
  const double atten_db = kKaiserBeta / 0.1102 + 8.7;
  return (atten_db - 8.0) / (2.285 * 2.0 * std::numbers::pi * static_cast<double>(taps - 1));
}

}  // namespace

PolyphaseResampler::PolyphaseResampler(double from_hz, double to_hz) {
  if (!(from_hz > 0.0 && to_hz > 0.0)) throw Error(ErrorKind::InvalidArgument, "sample rates must be positive");
  const auto from_milli = static_cast<std::uint64_t>(std::llround(from_hz * 1000.0));
  const auto to_milli = static_cast<std::uint64_t>(std::llround(to_hz * 1000.0));
  const auto g = std::gcd(from_milli, to_milli);
  up_ = static_cast<std::size_t>(to_milli / g);
  down_ = static_cast<std::size_t>(from_milli / g);
  if (up_ == down_) {
    up_ = down_ = 1;
    return;
  }
  if (up_ > 4096 || down_ > 4096) throw Error(ErrorKind::InvalidArgument, "rate ratio too irregular for polyphase");

  const std::size_t max_factor = std::max(up_, down_);
  half_ = kHalfLengthPerPhase * max_factor;
  const std::size_t n_taps = 2 * half_ + 1;
  // Frequencies normalized to the upsampled rate (1.0 = fs_up).
  const double stop = 0.5 / static_cast<double>(max_factor);
  const double cutoff = stop - 0.5 * transition_width_fraction(n_taps);

  taps_.resize(n_taps);
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
  for (std::size_t i = 0; i < n_taps; ++i) {
    const double k = static_cast<double>(i) - static_cast<double>(half_);
    const double arg = 2.0 * std::numbers::pi * cutoff * k;
    const double sinc = k == 0.0 ? 2.0 * cutoff : std::sin(arg) / (std::numbers::pi * k);
    const double r = k / static_cast<double>(half_);
    const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    taps_[i] = sinc * window * static_cast<double>(up_);
  }
}

std::size_t PolyphaseResampler::output_length(std::size_t n) const noexcept {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * static_cast<double>(up_) / static_cast<double>(down_)));
}

std::vector<double> PolyphaseResampler::process(std::span<const double> x) const {
  if (identity()) return {x.begin(), x.end()};
  const auto n = static_cast<std::int64_t>(x.size());
  const std::size_t n_out = output_length(x.size());
  std::vector<double> y(n_out, 0.0);
  if (n == 0) return y;

  const auto up = static_cast<std::int64_t>(up_);
  const auto down = static_cast<std::int64_t>(down_);
  const auto half = static_cast<std::int64_t>(half_);

  // Even reflection about the end samples, laid out once so the tap loop is
  // a plain dot product. Repeats for very short inputs.
  const std::int64_t pad = half / up + 1;
  std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad));
  for (std::int64_t j = -pad; j < n + pad; ++j) {
    std::int64_t s = 0;
    if (n > 1) {
      const std::int64_t period = 2 * (n - 1);
      s = j % period;
      if (s < 0) s += period;
      if (s >= n) s = period - s;
    }
    ext[static_cast<std::size_t>(j + pad)] = x[static_cast<std::size_t>(s)];
  }

  for (std::size_t k = 0; k < n_out; ++k) {
    const std::int64_t t = static_cast<std::int64_t>(k) * down;  // position on the upsampled grid
    // Input samples j with |t - j·up| <= half.
    const std::int64_t j_lo = (t - half + up - 1 >= 0) ? (t - half + up - 1) / up : -((half - t) / up);
    const std::int64_t j_hi = (t + half) / up;
    double acc = 0.0;
    for (std::int64_t j = j_lo; j <= j_hi; ++j)
      acc += taps_[static_cast<std::size_t>(t - j * up + half)] * ext[static_cast<std::size_t>(j + pad)];
    y[k] = acc;
  }
  return y;
}

std::vector<double> resample_polyphase(std::span<const double> x, double from_hz, double to_hz) {
  return PolyphaseResampler(from_hz, to_hz).process(x);
}

}  // namespace painscope
