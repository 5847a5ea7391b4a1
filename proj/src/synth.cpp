#include <algorithm>
#include <cmath>
#include <numbers>

#include "painscope/error.hpp"
#include "painscope/evaluation.hpp"

namespace painscope {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kPinkRms = 3.0;  // RMS of the three-pole filter driven by unit white noise
constexpr double kThetaHz = 6.0;
constexpr double kGammaHz = 40.0;
constexpr double kRestingThetaUv = 1.5;
constexpr double kWarmupSeconds = 0.5;

std::ptrdiff_t find_channel(const std::vector<std::string>& names, std::string_view name) {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : it - names.begin();
}

// Resting α is strongest over parietal/occipital sites, weakest frontally.
double alpha_topography(const std::string& ch) {
  if (ch.empty()) return 0.6;
  switch (ch[0]) {
    case 'O': return 1.0;
    case 'P': return 0.9;
    case 'C': return 0.8;
    case 'T': return 0.6;
    default: return 0.5;
  }
}

}  // namespace

SynthSource::SynthSource(const SynthConfig& cfg, std::size_t subject_index, std::uint64_t stream_seed)
    : cfg_(cfg) {
  if (cfg.fs_hz <= 0.0 || cfg.channels.empty()) throw Error(ErrorKind::InvalidArgument, "synth needs fs and channels");
  std::seed_seq subject_seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                            static_cast<std::uint32_t>(subject_index), 0x5eedu};
  std::mt19937_64 subject_rng(subject_seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto spread = [&](double s) { return 1.0 - s + 2.0 * s * unit(subject_rng); };
  gain_ = spread(cfg.subject_gain_spread);
  effect_ = spread(cfg.effect_spread);
  alpha_hz_ = 9.0 + 2.0 * unit(subject_rng);
  for (const auto& ch : cfg.channels) alpha_weight_.push_back(alpha_topography(ch) * spread(0.2));

  std::seed_seq stream_seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                           static_cast<std::uint32_t>(subject_index), static_cast<std::uint32_t>(stream_seed),
                           static_cast<std::uint32_t>(stream_seed >> 32)};
  rng_.seed(stream_seq);
  phase_.resize(cfg.channels.size());
  pink_.assign(cfg.channels.size(), {0.0, 0.0, 0.0});

  c4_ = find_channel(cfg.channels, "C4");
  c3_ = find_channel(cfg.channels, "C3");
  cz_ = find_channel(cfg.channels, "Cz");
  fcz_ = find_channel(cfg.channels, "FCz");
  fz_ = find_channel(cfg.channels, "Fz");
  new_epoch();
}

void SynthSource::new_epoch() {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  epoch_alpha_scale_ = std::exp(0.25 * normal(rng_));
  epoch_effect_scale_ = 0.6 + 0.8 * unit(rng_);
  for (auto& p : phase_) p = kTwoPi * unit(rng_);
}

double SynthSource::pink_step(std::array<double, 3>& s, double w) const {
  s[0] = 0.99765 * s[0] + w * 0.0990460;
  s[1] = 0.96300 * s[1] + w * 0.2965164;
  s[2] = 0.57000 * s[2] + w * 1.0526913;
  return (s[0] + s[1] + s[2] + w * 0.1848) / kPinkRms;
}

Matrix SynthSource::next(std::size_t n) {
  const std::size_t n_ch = cfg_.channels.size();
  Matrix out(n_ch, n);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double strength = pain_ ? effect_ * epoch_effect_scale_ : 0.0;
  const double suppression = std::min(0.9, cfg_.alpha_suppression * strength);
  for (std::size_t k = 0; k < n; ++k, ++t_) {
    const double t = static_cast<double>(t_) / cfg_.fs_hz;
    const double since_onset = static_cast<double>(t_ - std::min(t_, onset_)) / cfg_.fs_hz;
    const double common = pink_step(common_, normal(rng_));
    const double burst = 0.6 + 1.4 * std::exp(-std::pow((since_onset - 0.15) / 0.1, 2.0));
    for (std::size_t c = 0; c < n_ch; ++c) {
      const auto ci = static_cast<std::ptrdiff_t>(c);
      double alpha = cfg_.alpha_uv * alpha_weight_[c] * epoch_alpha_scale_;
      if (ci == c4_) alpha *= 1.0 - suppression;
      else if (ci == c3_ || ci == cz_) alpha *= 1.0 - 0.3 * suppression;

      double theta = kRestingThetaUv;
      if (ci == cz_) theta += cfg_.theta_boost_uv * strength;
      else if (ci == fcz_ || ci == fz_) theta += 0.4 * cfg_.theta_boost_uv * strength;

      double gamma = 0.0;
      if (ci == fcz_) gamma = cfg_.gamma_burst_uv * strength * burst;

      const double ph = phase_[c];
      double v = cfg_.background_uv * (0.8 * pink_step(pink_[c], normal(rng_)) + 0.6 * common);
      v += alpha * std::sin(kTwoPi * alpha_hz_ * t + ph);
      v += theta * std::sin(kTwoPi * kThetaHz * t + 1.7 * ph);
      if (gamma != 0.0) v += gamma * std::sin(kTwoPi * kGammaHz * t + 2.3 * ph);
      out(c, k) = gain_ * v;
    }
  }
  return out;
}

EpochSet synth_generate(const SynthConfig& cfg, ExecPolicy policy) {
  if (cfg.n_subjects == 0 || cfg.epochs_per_class == 0 || cfg.epoch_seconds <= 0.0)
    throw Error(ErrorKind::InvalidArgument, "synth needs subjects, epochs and a positive epoch length");
  const std::size_t per_subject = 2 * cfg.epochs_per_class;
  const auto n = static_cast<std::size_t>(std::lround(cfg.epoch_seconds * cfg.fs_hz));
  const auto warmup = static_cast<std::size_t>(std::lround(kWarmupSeconds * cfg.fs_hz));

  EpochSet set;
  set.channel_names = cfg.channels;
  set.epochs.resize(cfg.n_subjects * per_subject);
  for_each_index(set.epochs.size(), policy, [&](std::size_t idx) {
    const std::size_t s = idx / per_subject;
    const std::size_t e = idx % per_subject;
    SynthSource src(cfg, s, e + 1);
    const bool high = e % 2 == 1;
    src.set_pain(high);
    src.next(warmup);
    src.mark_onset();
    Epoch& ep = set.epochs[idx];
    char id[32];
    std::snprintf(id, sizeof id, "synth%02zu", s + 1);
    ep.subject_id = id;
    ep.label = high ? PainLabel::High : PainLabel::Low;
    ep.onset_sample = e * n;
    ep.fs_hz = cfg.fs_hz;
    ep.samples = src.next(n);
    ep.channel_mask.assign(cfg.channels.size(), true);
  });
  return set;
}

RawRecording synth_recording(const SynthConfig& cfg, std::size_t subject_index, double seconds, double isi_seconds) {
  if (seconds <= 0.0 || isi_seconds <= 0.0) throw Error(ErrorKind::InvalidArgument, "positive durations required");
  const auto total = static_cast<std::size_t>(std::lround(seconds * cfg.fs_hz));
  const auto isi = static_cast<std::size_t>(std::lround(isi_seconds * cfg.fs_hz));
  const auto on_len = static_cast<std::size_t>(std::lround(std::min(cfg.epoch_seconds, isi_seconds) * cfg.fs_hz));

  RawRecording rec;
  char id[32];
  std::snprintf(id, sizeof id, "synth%02zu", subject_index + 1);
  rec.subject_id = id;
  rec.header.channel_names = cfg.channels;
  rec.header.channel_count = cfg.channels.size();
  rec.header.sampling_rate_hz = cfg.fs_hz;
  rec.header.resolution_per_channel.assign(cfg.channels.size(), 1.0);
  rec.header.binary_format = BinaryFormat::Float32;
  rec.header.orientation = Orientation::Multiplexed;
  rec.header.reference_label = "Cz";
  rec.header.data_filename = rec.subject_id + ".eeg";
  rec.header.marker_filename = rec.subject_id + ".vmrk";
  rec.samples = Matrix(cfg.channels.size(), total);

  SynthSource src(cfg, subject_index, 0xC0FFEE);
  std::size_t pos = 0;
  std::uint32_t mk = 1;
  rec.markers.push_back({mk++, "New Segment", "", 0, 1, 0});
  const auto emit = [&](std::size_t len) {
    const Matrix block = src.next(len);
    for (std::size_t c = 0; c < block.rows(); ++c)
      for (std::size_t k = 0; k < len; ++k)
        rec.samples(c, pos + k) = static_cast<double>(static_cast<float>(block(c, k)));  // float32 payload
    pos += len;
  };
  emit(std::min(isi, total));
  for (std::size_t stim = 0; pos < total; ++stim) {
    const bool high = stim % 2 == 1;
    rec.markers.push_back({mk++, "Stimulus", high ? "S 70" : "S 30", pos, 1, 0});
    src.new_epoch();
    src.set_pain(high);
    src.mark_onset();
    emit(std::min(on_len, total - pos));
    src.set_pain(false);
    if (pos < total) emit(std::min(isi - on_len, total - pos));
  }
  return rec;
}

}  // namespace painscope
