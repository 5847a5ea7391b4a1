#include "painscope/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "painscope/error.hpp"
#include "painscope/resample.hpp"

namespace painscope {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

void FilterSpec::validate(double fs_hz) const {
  if (!(highpass_cutoff_hz > 0.0 && highpass_cutoff_hz < notch_hz && notch_hz < fs_hz / 2))
    throw Error(ErrorKind::InvalidArgument, "require 0 < highpass cutoff < notch < fs/2");
  if (fir_taps % 2 == 0) throw Error(ErrorKind::InvalidArgument, "fir_taps must be odd");
}

std::vector<double> highpass_zero_phase(std::span<const double> signal, double fs_hz, const FilterSpec& spec) {
  if (signal.size() <= 3 * spec.fir_taps)
    throw Error(ErrorKind::SignalTooShort,
                std::to_string(signal.size()) + " samples, need > " + std::to_string(3 * spec.fir_taps));
  const auto h = design_highpass_fir(spec.highpass_cutoff_hz, fs_hz, spec.fir_taps);
  return fir_filtfilt(signal, h, 3 * spec.fir_taps);
}

std::vector<double> notch_zero_phase(std::span<const double> signal, double fs_hz, const FilterSpec& spec) {
  const Sos sos{design_notch(spec.notch_hz, spec.notch_q, fs_hz)};
  // Pad by ~3 time constants of the notch resonance.
  const auto padlen = static_cast<std::size_t>(std::ceil(3.0 * spec.notch_q * fs_hz / spec.notch_hz));
  return sos_filtfilt(sos, signal, padlen);
}

std::vector<double> robust_z(std::span<const double> values) {
  std::vector<double> z(values.size(), 0.0);
  if (values.empty()) return z;
  const std::vector<double> v(values.begin(), values.end());
  const double med = median(v);
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
  double scale = 1.4826 * median(dev);
  if (!(scale > 0.0)) scale = 1.2533 * std::accumulate(dev.begin(), dev.end(), 0.0) / static_cast<double>(dev.size());
  if (!(scale > 0.0)) return z;
  for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - med) / scale;
  return z;
}

std::size_t ChannelQuality::bad_count() const {
  return static_cast<std::size_t>(std::count(bad_mask.begin(), bad_mask.end(), true));
}

ChannelQuality detect_bad_channels(const Matrix& samples, double z_threshold) {
  const std::size_t n_ch = samples.rows();
  const std::size_t n = samples.cols();
  if (n_ch < 4) throw Error(ErrorKind::TooFewChannels, std::to_string(n_ch) + " channels, need >= 4");
  if (n < 2) throw Error(ErrorKind::SignalTooShort, "need at least 2 samples per channel");

  ChannelQuality q;
  q.z_threshold = z_threshold;
  q.variance.resize(n_ch);
  Matrix unit(n_ch, n);  // centered rows scaled to unit norm (zero rows stay zero)
  for (std::size_t c = 0; c < n_ch; ++c) {
    const auto row = samples.row(c);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : row) ss += (v - mean) * (v - mean);
    q.variance[c] = ss / static_cast<double>(n);
    const double norm = std::sqrt(ss);
    auto out = unit.row(c);
    for (std::size_t t = 0; t < n; ++t) out[t] = norm > 0.0 ? (row[t] - mean) / norm : 0.0;
  }
  q.mean_abs_correlation.assign(n_ch, 0.0);
  for (std::size_t a = 0; a < n_ch; ++a) {
    double acc = 0.0;
    for (std::size_t b = 0; b < n_ch; ++b) {
      if (a == b) continue;
      const auto ra = unit.row(a);
      const auto rb = unit.row(b);
      acc += std::abs(std::inner_product(ra.begin(), ra.end(), rb.begin(), 0.0));
    }
    q.mean_abs_correlation[a] = acc / static_cast<double>(n_ch - 1);
  }
  const auto zv = robust_z(q.variance);
  const auto zc = robust_z(q.mean_abs_correlation);
  q.bad_mask.resize(n_ch);
  for (std::size_t c = 0; c < n_ch; ++c)
    q.bad_mask[c] = std::abs(zv[c]) > z_threshold || std::abs(zc[c]) > z_threshold;
  return q;
}

RejectionResult reject_artifact_epochs(const EpochSet& set, double ptp_threshold_uv) {
  if (!(ptp_threshold_uv > 0.0)) throw Error(ErrorKind::InvalidArgument, "peak-to-peak threshold must be positive");
  RejectionResult result;
  result.kept.channel_names = set.channel_names;
  result.kept.skipped_markers = set.skipped_markers;
  for (const auto& e : set.epochs) {
    double worst = 0.0;
    for (std::size_t c = 0; c < e.samples.rows(); ++c) {
      if (!e.channel_mask.empty() && !e.channel_mask[c]) continue;
      const auto row = e.samples.row(c);
      if (row.empty()) continue;
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      worst = std::max(worst, *hi - *lo);
    }
    if (worst > ptp_threshold_uv) ++result.rejected;
    else result.kept.epochs.push_back(e);
  }
  if (!set.epochs.empty() && result.kept.epochs.empty())
    throw Error(ErrorKind::AllEpochsRejected, "every epoch exceeded " + std::to_string(ptp_threshold_uv) + " µV");
  result.rejection_rate =
      set.epochs.empty() ? 0.0 : static_cast<double>(result.rejected) / static_cast<double>(set.epochs.size());
  return result;
}

double estimate_snr_db(const EpochSet& set) {
  double total_db = 0.0;
  std::size_t groups = 0;
  for (const auto label : {PainLabel::Low, PainLabel::High}) {
    std::vector<const Epoch*> group;
    for (const auto& e : set.epochs)
      if (e.label == label) group.push_back(&e);
    if (group.size() < 2) continue;
    const std::size_t n_ch = group.front()->samples.rows();
    const std::size_t n = group.front()->samples.cols();
    for (const auto* e : group)
      if (e->samples.rows() != n_ch || e->samples.cols() != n)
        throw Error(ErrorKind::InvalidArgument, "epochs of differing shape");

    double channel_db = 0.0;
    std::size_t used = 0;
    std::vector<double> evoked(n);
    for (std::size_t c = 0; c < n_ch; ++c) {
      const bool usable = std::all_of(group.begin(), group.end(), [c](const Epoch* e) {
        return e->channel_mask.empty() || e->channel_mask[c];
      });
      if (!usable) continue;
      std::fill(evoked.begin(), evoked.end(), 0.0);
      for (const auto* e : group) {
        const auto row = e->samples.row(c);
        for (std::size_t t = 0; t < n; ++t) evoked[t] += row[t];
      }
      for (auto& v : evoked) v /= static_cast<double>(group.size());
      double signal = 0.0;
      for (double v : evoked) signal += v * v;
      signal /= static_cast<double>(n);
      double residual = 0.0;
      for (const auto* e : group) {
        const auto row = e->samples.row(c);
        for (std::size_t t = 0; t < n; ++t) residual += (row[t] - evoked[t]) * (row[t] - evoked[t]);
      }
      residual /= static_cast<double>(n * group.size());
      double db = kSnrCapDb;
      if (residual > 0.0) db = signal > 0.0 ? 10.0 * std::log10(signal / residual) : -kSnrCapDb;
      channel_db += std::clamp(db, -kSnrCapDb, kSnrCapDb);
      ++used;
    }
    if (used == 0) continue;
    total_db += channel_db / static_cast<double>(used);
    ++groups;
  }
  if (groups == 0) throw Error(ErrorKind::InsufficientEpochs, "need >= 2 epochs of one label on a usable channel");
  return total_db / static_cast<double>(groups);
}

PreprocessedRecording preprocess_recording(const RawRecording& rec, const PreprocessConfig& cfg, ExecPolicy policy) {
  const double fs = rec.header.sampling_rate_hz;
  cfg.filter.validate(fs);
  const std::size_t n_ch = rec.samples.rows();
  const PolyphaseResampler resampler(fs, cfg.target_rate_hz);
  const std::size_t n_out = resampler.output_length(rec.n_samples());

  PreprocessedRecording out;
  out.recording.header = rec.header;
  out.recording.subject_id = rec.subject_id;
  out.recording.header.sampling_rate_hz = resampler.identity() ? fs : cfg.target_rate_hz;
  out.recording.samples = Matrix(n_ch, n_out);

  const auto process_channel = [&](std::size_t c) {
    auto x = highpass_zero_phase(rec.samples.row(c), fs, cfg.filter);
    x = notch_zero_phase(x, fs, cfg.filter);
    x = resampler.process(x);
    std::copy(x.begin(), x.end(), out.recording.samples.row(c).begin());
  };
  for_each_index(n_ch, policy, process_channel);

  const double ratio = static_cast<double>(resampler.up()) / static_cast<double>(resampler.down());
  for (auto m : rec.markers) {
    m.position_samples = static_cast<std::uint64_t>(std::llround(static_cast<double>(m.position_samples) * ratio));
    m.duration_samples = static_cast<std::uint64_t>(std::llround(static_cast<double>(m.duration_samples) * ratio));
    if (m.position_samples < n_out) out.recording.markers.push_back(m);
  }
  out.quality = detect_bad_channels(out.recording.samples, cfg.z_threshold);
  return out;
}

void apply_channel_mask(EpochSet& set, const std::vector<bool>& bad_mask) {
  for (auto& e : set.epochs) {
    e.channel_mask.resize(bad_mask.size(), true);
    for (std::size_t c = 0; c < bad_mask.size(); ++c)
      if (bad_mask[c]) e.channel_mask[c] = false;
  }
}

}  // namespace painscope
