#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "painscope/filters.hpp"
#include "painscope/ingest.hpp"
#include "painscope/matrix.hpp"
#include "painscope/parallel.hpp"

namespace painscope {

struct FilterSpec {
  double highpass_cutoff_hz = 1.0;
  double notch_hz = 50.0;
  double notch_q = 30.0;
  std::size_t fir_taps = 1001;
  std::optional<std::pair<double, double>> bandpass_hz;  // realtime path: {1, 90}

  void validate(double fs_hz) const;
};

std::vector<double> highpass_zero_phase(std::span<const double> signal, double fs_hz, const FilterSpec& spec);
std::vector<double> notch_zero_phase(std::span<const double> signal, double fs_hz, const FilterSpec& spec);

/// Median/scaled-MAD z-scores. When the MAD is zero the mean absolute
/// deviation (× 1.2533) is used instead; when that is zero too, all scores are 0.
std::vector<double> robust_z(std::span<const double> values);

struct ChannelQuality {
  std::vector<double> variance;
  std::vector<double> mean_abs_correlation;
  std::vector<bool> bad_mask;
  double z_threshold = 3.0;

  std::size_t bad_count() const;
};

ChannelQuality detect_bad_channels(const Matrix& samples, double z_threshold = 3.0);

struct RejectionResult {
  EpochSet kept;
  double rejection_rate = 0.0;
  std::size_t rejected = 0;
};

/// Drops epochs whose peak-to-peak amplitude over usable channels exceeds the threshold.
RejectionResult reject_artifact_epochs(const EpochSet& set, double ptp_threshold_uv = 150.0);

inline constexpr double kSnrCapDb = 120.0;

/// 10·log10(power of trial average / mean residual power), per label group
/// with at least two epochs, averaged over usable channels and groups.
double estimate_snr_db(const EpochSet& set);

struct PreprocessConfig {
  FilterSpec filter;
  double target_rate_hz = 500.0;
  double z_threshold = 3.0;
  double ptp_threshold_uv = 150.0;
};

struct PreprocessedRecording {
  RawRecording recording;  // filtered and resampled; markers rescaled
  ChannelQuality quality;
};

/// Continuous-recording stages: zero-phase high-pass, notch, resampling to the
/// target rate (when it differs) and bad-channel detection.
PreprocessedRecording preprocess_recording(const RawRecording& rec, const PreprocessConfig& cfg,
                                           ExecPolicy policy = ExecPolicy::Parallel);

/// Applies a channel mask to every epoch of a set.
void apply_channel_mask(EpochSet& set, const std::vector<bool>& bad_mask);

}  // namespace painscope
