#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace painscope {

/// Rational polyphase resampler: upsample by `up`, Kaiser-windowed sinc
/// anti-alias/anti-image filter, downsample by `down`. The stopband edge sits
/// at the lower of the two Nyquist rates. Input edges are extended by even
/// reflection. Construct once per rate pair and reuse.
class PolyphaseResampler {
public:
  PolyphaseResampler(double from_hz, double to_hz);

  std::size_t up() const noexcept { return up_; }
  std::size_t down() const noexcept { return down_; }
  const std::vector<double>& taps() const noexcept { return taps_; }
  bool identity() const noexcept { return up_ == down_; }

  /// round(n · to / from) samples.
  std::size_t output_length(std::size_t n) const noexcept;
  std::vector<double> process(std::span<const double> x) const;

private:
  std::size_t up_ = 1;
  std::size_t down_ = 1;
  std::size_t half_ = 0;
  std::vector<double> taps_;
};

std::vector<double> resample_polyphase(std::span<const double> x, double from_hz, double to_hz);

}  // namespace painscope
