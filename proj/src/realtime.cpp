#include "painscope/realtime.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"
#include "painscope/error.hpp"

namespace painscope {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

std::size_t padlen_for(std::size_t n) { return std::min<std::size_t>(n - 1, n / 2); }

Sos make_bandpass(const PipelineConfig& cfg) {
  Sos sos = design_butter_highpass(cfg.bandpass_lo_hz, cfg.target_rate_hz, 2);
  const Sos lp = design_butter_lowpass(cfg.bandpass_hi_hz, cfg.target_rate_hz, cfg.bandpass_order);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return sos;
}

// Zero-phase band-pass then notch, each forward-backward over a reflected
// extension of half the window.
std::vector<double> filter_channel(std::span<const double> x, const Sos& bandpass, const Sos& notch) {
  const auto bp = sos_filtfilt(bandpass, x, padlen_for(x.size()));
  return sos_filtfilt(notch, bp, padlen_for(bp.size()));
}

std::unique_ptr<bool[]> to_bool_array(const std::vector<bool>& v) {
  std::unique_ptr<bool[]> out(new bool[v.size()]);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

void check_pipeline_config(const PipelineConfig& cfg) {
  if (!(cfg.source_rate_hz > 0.0) || !(cfg.target_rate_hz > 0.0) || !(cfg.window_seconds > 0.0))
    throw Error(ErrorKind::InvalidArgument, "pipeline rates and window must be positive");
  if (!(cfg.bandpass_hi_hz < cfg.target_rate_hz / 2.0) || !(cfg.bandpass_lo_hz > 0.0) ||
      !(cfg.bandpass_lo_hz < cfg.bandpass_hi_hz))
    throw Error(ErrorKind::InvalidArgument, "band-pass edges must satisfy 0 < lo < hi < Nyquist");
  if (cfg.mask_history == 0) throw Error(ErrorKind::InvalidArgument, "mask history must be positive");
}

}  // namespace

bool PredictionEvent::has_flag(std::string_view f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

// ---- masking -------------------------------------------------------------

ChannelMasker::ChannelMasker(std::size_t channels, std::size_t history, double z)
    : channels_(channels), history_(history), z_(z), stats_(channels, std::vector<double>(history, 0.0)) {}

void ChannelMasker::reset() {
  filled_ = 0;
  cursor_ = 0;
}

std::vector<bool> ChannelMasker::update(const Matrix& window) {
  std::vector<bool> usable(channels_, true);
  const std::size_t n = window.cols();
  for (std::size_t c = 0; c < channels_; ++c) {
    const auto row = window.row(c);
    double mean = 0.0;
    bool finite = true;
    for (double v : row) {
      finite = finite && std::isfinite(v);
      mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const bool flat = !(var > 1e-12);
    if (!finite || flat) usable[c] = false;
    stats_[c][cursor_] = finite && !flat ? std::log(var) : std::numeric_limits<double>::quiet_NaN();
  }
  cursor_ = (cursor_ + 1) % history_;
  filled_ = std::min(filled_ + 1, history_);

  // Running median per channel over the finite history entries.
  std::vector<double> med(channels_, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> finite_meds;
  for (std::size_t c = 0; c < channels_; ++c) {
    std::vector<double> h;
    for (std::size_t i = 0; i < filled_; ++i)
      if (std::isfinite(stats_[c][i])) h.push_back(stats_[c][i]);
    if (h.empty()) continue;
    std::nth_element(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(h.size() / 2), h.end());
    med[c] = h[h.size() / 2];
    if (usable[c]) finite_meds.push_back(med[c]);
  }
  if (finite_meds.size() >= 3) {
    const auto z = robust_z(finite_meds);
    std::vector<double> sorted = finite_meds;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double center = sorted[sorted.size() / 2];
    std::size_t k = 0;
    for (std::size_t c = 0; c < channels_; ++c) {
      if (!usable[c]) continue;
      // The z-score alone would mask channels a few percent apart when the
      // montage is very uniform, so a 4x variance departure is also required.
      if (std::abs(z[k]) > z_ && std::abs(med[c] - center) > std::log(4.0)) usable[c] = false;
      ++k;
    }
  }
  return usable;
}

// ---- pipeline ------------------------------------------------------------

WindowPipeline::WindowPipeline(PipelineConfig cfg, std::vector<std::string> channels,
                               std::shared_ptr<const TrainedModel> model)
    : cfg_(std::move(cfg)),
      channels_(std::move(channels)),
      manifest_(build_manifest(channels_, cfg_.features)),
      resampler_(cfg_.source_rate_hz, cfg_.target_rate_hz),
      masker_(channels_.size(), cfg_.mask_history, cfg_.mask_z),
      window_samples_(static_cast<std::size_t>(std::lround(cfg_.window_seconds * cfg_.source_rate_hz))) {
  check_pipeline_config(cfg_);
  bandpass_ = make_bandpass(cfg_);
  notch_ = {design_notch(cfg_.notch_hz, cfg_.notch_q, cfg_.target_rate_hz)};
  set_model(std::move(model));
}

void WindowPipeline::set_model(std::shared_ptr<const TrainedModel> model) {
  if (model && !model->manifest_hash.empty() && model->manifest_hash != manifest_.content_hash)
    throw Error(ErrorKind::ManifestMismatch, "model manifest " + model->manifest_hash + " does not match stream manifest " +
                                                 manifest_.content_hash);
  model_ = std::move(model);
}

Matrix WindowPipeline::condition(const Matrix& window) const {
  Matrix out(window.rows(), resampler_.output_length(window.cols()));
  for (std::size_t c = 0; c < window.rows(); ++c) {
    const auto up = resampler_.identity() ? std::vector<double>(window.row(c).begin(), window.row(c).end())
                                          : resampler_.process(window.row(c));
    const auto y = filter_channel(up, bandpass_, notch_);
    std::copy(y.begin(), y.end(), out.row(c).begin());
  }
  return out;
}

void WindowPipeline::average_reference(Matrix& x, const std::vector<bool>& usable) {
  const std::size_t used = static_cast<std::size_t>(std::count(usable.begin(), usable.end(), true));
  for (std::size_t k = 0; k < x.cols(); ++k) {
    double mean = 0.0;
    for (std::size_t c = 0; c < x.rows(); ++c)
      if (usable[c]) mean += x(c, k);
    mean = used ? mean / static_cast<double>(used) : 0.0;
    for (std::size_t c = 0; c < x.rows(); ++c) x(c, k) = usable[c] ? x(c, k) - mean : 0.0;
  }
}

PredictionEvent WindowPipeline::tick(const RingBuffer::Window& window, double t) {
  if (!model_ || !model_->fitted()) throw Error(ErrorKind::ModelMissing, "no trained model loaded");
  if (window.samples.rows() != channels_.size())
    throw Error(ErrorKind::ChannelMismatch, "window channel count differs from the pipeline's");
  const auto t_start = Clock::now();
  PredictionEvent ev;
  ev.sequence = ++sequence_;
  ev.t = t;
  ev.window_end_sample = window.end_sample;
  ev.threshold = cfg_.threshold;
  if (window.partial) ev.flags.emplace_back("partial_window");

  try {
    auto t0 = Clock::now();
    Matrix up(channels_.size(), resampler_.output_length(window.samples.cols()));
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      const auto y = resampler_.identity()
                         ? std::vector<double>(window.samples.row(c).begin(), window.samples.row(c).end())
                         : resampler_.process(window.samples.row(c));
      std::copy(y.begin(), y.end(), up.row(c).begin());
    }
    ev.latency.resample_us = micros_since(t0);

    t0 = Clock::now();
    Matrix x(up.rows(), up.cols());
    for (std::size_t c = 0; c < up.rows(); ++c) {
      const auto y = filter_channel(up.row(c), bandpass_, notch_);
      std::copy(y.begin(), y.end(), x.row(c).begin());
    }
    // Cold-start windows are zero-padded; keep them out of the mask history.
    const std::vector<bool> usable = window.partial ? std::vector<bool>(channels_.size(), true) : masker_.update(x);
    average_reference(x, usable);
    for (std::size_t c = 0; c < channels_.size(); ++c)
      if (!usable[c]) ev.masked.push_back(channels_[c]);
    if (ev.masked.size() == channels_.size()) ev.flags.emplace_back("all_masked");
    ev.latency.filter_us = micros_since(t0);

    t0 = Clock::now();
    if (feature_hook) feature_hook();
    const auto usable_arr = to_bool_array(usable);
    const WindowView view{x, channels_, std::span<const bool>(usable_arr.get(), usable.size()), cfg_.target_rate_hz};
    last_features_ = extract_features(view, cfg_.features, manifest_, ExecPolicy::Serial);
    if (last_features_.pad_truncate_applied) ev.flags.emplace_back("pad_truncate");
    ev.latency.features_us = micros_since(t0);

    t0 = Clock::now();
    std::vector<double> z(kFeatureSlots);
    if (model_->standardization.fitted) {
      apply_standardization_into(model_->standardization, last_features_.values, z);
    } else {
      for (std::size_t j = 0; j < kFeatureSlots; ++j)
        z[j] = std::isfinite(last_features_.values[j]) ? last_features_.values[j] : 0.0;
    }
    ev.latency.standardize_us = micros_since(t0);

    t0 = Clock::now();
    const double p = model_->proba_standardized(z);
    ev.latency.infer_us = micros_since(t0);
    if (!std::isfinite(p)) throw Error(ErrorKind::NonFiniteFeature, "model produced a non-finite probability");
    ev.probability = p;
    last_probability_ = p;
  } catch (const Error&) {
    ev.flags.emplace_back("feature_error");
    ev.probability = last_probability_;
  }
  ev.label = ev.probability >= ev.threshold ? PainLabel::High : PainLabel::Low;
  ev.latency.total_us = micros_since(t_start);
  return ev;
}

// ---- offline reference ---------------------------------------------------

OfflineWindowReference::OfflineWindowReference(const PipelineConfig& cfg, std::vector<std::string> channels)
    : cfg_(cfg),
      channels_(std::move(channels)),
      manifest_(build_manifest(channels_, cfg_.features)),
      masker_(channels_.size(), cfg_.mask_history, cfg_.mask_z),
      window_samples_(static_cast<std::size_t>(std::lround(cfg_.window_seconds * cfg_.source_rate_hz))) {
  check_pipeline_config(cfg_);
  bandpass_ = make_bandpass(cfg_);
  notch_ = {design_notch(cfg_.notch_hz, cfg_.notch_q, cfg_.target_rate_hz)};
}

FeatureVector OfflineWindowReference::features(const Matrix& source_samples, std::uint64_t end_sample) {
  if (end_sample < window_samples_ || end_sample > source_samples.cols())
    throw Error(ErrorKind::InvalidArgument, "window end outside the recording");
  const std::size_t start = static_cast<std::size_t>(end_sample) - window_samples_;
  Matrix x;
  for (std::size_t c = 0; c < source_samples.rows(); ++c) {
    const auto seg = source_samples.row(c).subspan(start, window_samples_);
    const auto up = resample_polyphase(seg, cfg_.source_rate_hz, cfg_.target_rate_hz);
    const auto y = filter_channel(up, bandpass_, notch_);
    if (x.empty()) x = Matrix(source_samples.rows(), y.size());
    std::copy(y.begin(), y.end(), x.row(c).begin());
  }
  const auto usable = masker_.update(x);
  WindowPipeline::average_reference(x, usable);
  const auto arr = to_bool_array(usable);
  const WindowView view{x, channels_, std::span<const bool>(arr.get(), usable.size()), cfg_.target_rate_hz};
  return extract_features(view, cfg_.features, manifest_, ExecPolicy::Serial);
}

FeatureMatrix synth_window_features(const SynthConfig& synth, const PipelineConfig& cfg, ExecPolicy policy) {
  SynthConfig s = synth;
  s.fs_hz = cfg.source_rate_hz;
  const WindowPipeline shape(cfg, s.channels, nullptr);
  const std::size_t w = shape.window_samples();
  const std::size_t per_subject = 2 * s.epochs_per_class;
  const std::size_t total = s.n_subjects * per_subject;
  const auto warmup = static_cast<std::size_t>(std::lround(0.5 * s.fs_hz));

  FeatureMatrix fm;
  fm.manifest_hash = shape.manifest().content_hash;
  fm.values = Matrix(total, kFeatureSlots);
  fm.subjects.resize(total);
  fm.labels.resize(total);
  for_each_index(total, policy, [&](std::size_t idx) {
    const std::size_t subj = idx / per_subject;
    const std::size_t e = idx % per_subject;
    const bool high = e % 2 == 1;
    SynthSource src(s, subj, 0x1000 + e);
    std::mt19937_64 rng(s.seed ^ (0x9E37ull * (idx + 1)));
    // Positive windows end 0.25–4 s after onset so partially covered windows are learned too.
    const double lead = high ? 0.25 + 3.75 * std::uniform_real_distribution<double>(0.0, 1.0)(rng) : 1.0;
    src.next(warmup);
    src.set_pain(high);
    src.mark_onset();
    const auto lead_n = static_cast<std::size_t>(std::lround(lead * s.fs_hz));
    Matrix raw = src.next(std::max(lead_n, w));
    Matrix win(raw.rows(), w);
    for (std::size_t c = 0; c < raw.rows(); ++c)
      for (std::size_t k = 0; k < w; ++k) win(c, k) = static_cast<double>(static_cast<float>(raw(c, raw.cols() - w + k)));
    Matrix x = shape.condition(win);
    const std::vector<bool> usable(raw.rows(), true);
    WindowPipeline::average_reference(x, usable);
    const WindowView view{x, s.channels, {}, cfg.target_rate_hz};
    const auto fv = extract_features(view, cfg.features, shape.manifest(), ExecPolicy::Serial);
    std::copy(fv.values.begin(), fv.values.end(), fm.values.row(idx).begin());
    char id[32];
    std::snprintf(id, sizeof id, "synth%02zu", subj + 1);
    fm.subjects[idx] = id;
    fm.labels[idx] = high ? PainLabel::High : PainLabel::Low;
  });
  return fm;
}

// ---- alerting ------------------------------------------------------------

std::optional<AlertTransition> AlertEngine::update(double t, double p) {
  if (active_) {
    if (p < cfg_.threshold - cfg_.hysteresis) {
      active_ = false;
      streak_ = 0.0;
      return AlertTransition{false, t, since_};
    }
    streak_ += cfg_.tick_seconds;
    return std::nullopt;
  }
  if (p >= cfg_.threshold) {
    streak_ += cfg_.tick_seconds;
    if (streak_ >= cfg_.sustain_seconds - 1e-9) {
      active_ = true;
      since_ = t;
      return AlertTransition{true, t, since_};
    }
  } else {
    streak_ = 0.0;
  }
  return std::nullopt;
}

// ---- sources -------------------------------------------------------------

void Pacer::wait_for(std::uint64_t sample) {
  if (speed_ <= 0.0) return;
  const auto now = Clock::now();
  if (!start_) start_ = now;
  const auto due = *start_ + std::chrono::duration_cast<Clock::duration>(
                                 std::chrono::duration<double>(static_cast<double>(sample) / (rate_ * speed_)));
  if (due > now) std::this_thread::sleep_until(due);
}

SyntheticSource::SyntheticSource(const SynthConfig& cfg, Schedule schedule, std::size_t chunk_samples, double speed,
                                 double max_seconds, std::size_t subject_index)
    : cfg_(cfg),
      schedule_(schedule),
      chunk_(chunk_samples),
      limit_(max_seconds > 0.0 ? static_cast<std::uint64_t>(std::llround(max_seconds * cfg.fs_hz)) : 0),
      gen_(cfg, subject_index, 0x57AEA11),
      pacer_(cfg.fs_hz, speed) {
  if (chunk_samples == 0) throw Error(ErrorKind::InvalidArgument, "chunk size must be positive");
}

bool SyntheticSource::pain_at(std::uint64_t sample) const {
  const double period = schedule_.off_seconds + schedule_.on_seconds;
  if (period <= 0.0) return schedule_.start_on;
  double phase = std::fmod(static_cast<double>(sample) / cfg_.fs_hz, period);
  if (schedule_.start_on) phase = std::fmod(phase + schedule_.off_seconds, period);
  return phase >= schedule_.off_seconds;
}

std::optional<SourceChunk> SyntheticSource::next() {
  if (closed_) return std::nullopt;
  if (limit_ && produced_ >= limit_) return std::nullopt;
  std::size_t n = chunk_;
  if (limit_) n = static_cast<std::size_t>(std::min<std::uint64_t>(n, limit_ - produced_));
  SourceChunk out{produced_, MatrixF(cfg_.channels.size(), n)};
  // Generate sample by sample across schedule boundaries so onsets land exactly.
  std::size_t k = 0;
  while (k < n) {
    const bool pain = pain_at(produced_ + k);
    if (pain != gen_.pain()) {
      gen_.set_pain(pain);
      if (pain) {
        gen_.new_epoch();
        gen_.mark_onset();
      }
    }
    std::size_t run = 1;
    while (k + run < n && pain_at(produced_ + k + run) == pain) ++run;
    const Matrix block = gen_.next(run);
    for (std::size_t c = 0; c < block.rows(); ++c)
      for (std::size_t i = 0; i < run; ++i) out.samples(c, k + i) = static_cast<float>(block(c, i));
    k += run;
  }
  pacer_.wait_for(produced_ + n);
  produced_ += n;
  return out;
}

ReplaySource::ReplaySource(const RawRecording& rec, std::size_t chunk_samples, double speed)
    : channels_(rec.header.channel_names),
      rate_(rec.header.sampling_rate_hz),
      samples_(rec.samples.rows(), rec.samples.cols()),
      chunk_(chunk_samples),
      pacer_(rec.header.sampling_rate_hz, speed) {
  if (chunk_samples == 0) throw Error(ErrorKind::InvalidArgument, "chunk size must be positive");
  for (std::size_t i = 0; i < rec.samples.storage().size(); ++i)
    samples_.storage()[i] = static_cast<float>(rec.samples.storage()[i]);
}

std::optional<SourceChunk> ReplaySource::next() {
  if (closed_ || pos_ >= samples_.cols()) return std::nullopt;
  const std::size_t n = std::min<std::size_t>(chunk_, samples_.cols() - static_cast<std::size_t>(pos_));
  SourceChunk out{pos_, MatrixF(samples_.rows(), n)};
  for (std::size_t c = 0; c < samples_.rows(); ++c)
    std::copy_n(samples_.row(c).data() + pos_, n, out.samples.row(c).data());
  pacer_.wait_for(pos_ + n);
  pos_ += n;
  return out;
}

// ---- loop ----------------------------------------------------------------

void LatencyHistogram::add(double us) {
  ++count_;
  sum_ += us;
  max_ = std::max(max_, us);
  const double pos = std::log10(std::max(us, 1.0)) * 200.0;
  const auto b = std::min<std::size_t>(kBuckets - 1, static_cast<std::size_t>(pos));
  ++counts_[b];
}

double LatencyHistogram::quantile(double q) const {
  if (count_ == 0) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(count_)));
  std::size_t seen = 0;
  for (std::size_t b = 0; b < kBuckets; ++b) {
    seen += counts_[b];
    if (seen >= std::max<std::size_t>(rank, 1)) return std::min(max_, std::pow(10.0, static_cast<double>(b + 1) / 200.0));
  }
  return max_;
}

void ControlMailbox::post(const ControlMessage& m) {
  std::lock_guard lock(mutex_);
  pending_.push_back(m);
}

std::vector<ControlMessage> ControlMailbox::drain() {
  std::lock_guard lock(mutex_);
  return std::exchange(pending_, {});
}

namespace {

struct LoopState {
  SessionSettings settings;
  std::uint64_t expected_sample = 0;
};

void apply_controls(const LoopHooks& hooks, WindowPipeline& pipeline, LoopState& st) {
  if (!hooks.mailbox) return;
  for (const auto& m : hooks.mailbox->drain()) {
    switch (m.op) {
      case ControlOp::SetThreshold:
        st.settings.threshold = m.value;
        pipeline.set_threshold(m.value);
        if (hooks.alert) hooks.alert->set_threshold(m.value);
        break;
      case ControlOp::SetSustain:
        st.settings.sustain_seconds = m.value;
        if (hooks.alert) hooks.alert->set_sustain(m.value);
        break;
      case ControlOp::Pause: st.settings.paused = true; break;
      case ControlOp::Resume: st.settings.paused = false; break;
    }
    if (hooks.on_control) hooks.on_control(m, st.settings);
  }
}

void finish_tick(const LoopHooks& hooks, LoopState& st, LoopStats& stats, PredictionEvent& ev, double budget_us,
                 bool late = false) {
  if (st.settings.paused) ev.flags.emplace_back("paused");
  ++stats.events;
  stats.latency.add(ev.latency.total_us);
  if (late || ev.latency.total_us > budget_us) ++stats.missed_deadlines;
  if (ev.has_flag("partial_window")) ++stats.partial_windows;
  if (ev.has_flag("feature_error") || ev.has_flag("all_masked")) ++stats.flagged_events;
  if (hooks.on_event) hooks.on_event(ev);
  if (!st.settings.paused && !ev.has_flag("partial_window") && hooks.alert) {
    if (auto tr = hooks.alert->update(ev.t, ev.probability)) {
      ++stats.alerts;
      if (hooks.on_alert) hooks.on_alert(*tr);
    }
  }
}

void count_gap(LoopState& st, LoopStats& stats, const SourceChunk& c) {
  if (c.first_sample > st.expected_sample) stats.dropped_frames += c.first_sample - st.expected_sample;
  st.expected_sample = c.first_sample + c.samples.cols();
}

bool stop_requested(const LoopHooks& hooks) { return hooks.stop && hooks.stop->load(); }

}  // namespace

LoopStats run_loop(StreamSource& source, WindowPipeline& pipeline, const LoopConfig& cfg, const LoopHooks& hooks) {
  if (!(cfg.tick_ms > 0.0)) throw Error(ErrorKind::InvalidArgument, "tick must be positive");
  if (source.channels().size() != pipeline.channels().size())
    throw Error(ErrorKind::ChannelMismatch, "source and pipeline channel counts differ");
  LoopStats stats;
  LoopState st;
  st.settings.threshold = pipeline.config().threshold;
  if (hooks.alert) st.settings.sustain_seconds = hooks.alert->config().sustain_seconds;
  RingBuffer ring(pipeline.channels().size(), pipeline.window_samples());
  const double tick_s = cfg.tick_ms / 1000.0;
  const double rate = source.rate_hz();
  const auto wall_start = Clock::now();

  if (cfg.clock == ClockMode::Virtual) {
    std::optional<SourceChunk> pending;
    std::size_t pending_off = 0;
    std::uint64_t pos = 0;
    for (std::uint64_t k = 1;; ++k) {
      if (stop_requested(hooks)) {
        stats.stop_reason = "stopped";
        break;
      }
      if (cfg.max_seconds > 0.0 && static_cast<double>(k) * tick_s > cfg.max_seconds + 1e-9) {
        stats.stop_reason = "duration";
        break;
      }
      const auto target = static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * tick_s * rate));
      bool closed = false;
      while (pos < target) {
        if (!pending) {
          pending = source.next();
          pending_off = 0;
          if (!pending) {
            closed = true;
            break;
          }
          count_gap(st, stats, *pending);
        }
        const std::size_t avail = pending->samples.cols() - pending_off;
        const std::size_t take = static_cast<std::size_t>(std::min<std::uint64_t>(avail, target - pos));
        MatrixF part(pending->samples.rows(), take);
        for (std::size_t c = 0; c < part.rows(); ++c)
          std::copy_n(pending->samples.row(c).data() + pending_off, take, part.row(c).data());
        ring.push(part);
        pos += take;
        pending_off += take;
        if (pending_off == pending->samples.cols()) pending.reset();
      }
      if (closed) {
        stats.stop_reason = "source closed";
        break;
      }
      apply_controls(hooks, pipeline, st);
      auto ev = pipeline.tick(ring.snapshot(), static_cast<double>(k) * tick_s);
      finish_tick(hooks, st, stats, ev, cfg.tick_ms * 1000.0);
    }
    stats.elapsed_seconds = std::chrono::duration<double>(Clock::now() - wall_start).count();
    return stats;
  }

  // Realtime: a reader thread feeds the ring; ticks follow the monotonic clock.
  std::atomic<bool> source_done{false};
  std::atomic<std::size_t> dropped{0};
  std::exception_ptr reader_error;
  std::thread reader([&] {
    try {
      std::uint64_t expected = 0;
      while (!source_done.load()) {
        auto c = source.next();
        if (!c) break;
        if (c->first_sample > expected) dropped += static_cast<std::size_t>(c->first_sample - expected);
        expected = c->first_sample + c->samples.cols();
        ring.push(c->samples);
      }
    } catch (...) {
      reader_error = std::current_exception();
    }
    source_done.store(true);
  });

  const double speed = cfg.speed > 0.0 ? cfg.speed : 1.0;
  const double budget_us = cfg.tick_ms * 1000.0 / speed;
  const auto start = Clock::now();
  for (std::uint64_t k = 1;; ++k) {
    if (cfg.max_seconds > 0.0 && static_cast<double>(k) * tick_s > cfg.max_seconds + 1e-9) {
      stats.stop_reason = "duration";
      break;
    }
    const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                      std::chrono::duration<double>(static_cast<double>(k) * tick_s / speed));
    std::this_thread::sleep_until(deadline);
    if (stop_requested(hooks)) {
      stats.stop_reason = "stopped";
      break;
    }
    if (source_done.load()) {
      stats.stop_reason = reader_error ? "source error" : "source closed";
      break;
    }
    apply_controls(hooks, pipeline, st);
    const double t = std::chrono::duration<double>(Clock::now() - start).count() * speed;
    auto ev = pipeline.tick(ring.snapshot(), t);
    // A tick that starts after the next deadline has already broken the cadence.
    const double late_us = std::chrono::duration<double, std::micro>(Clock::now() - deadline).count() -
                           ev.latency.total_us;
    finish_tick(hooks, st, stats, ev, budget_us, late_us > budget_us);
  }
  source_done.store(true);
  source.close();
  reader.join();
  stats.dropped_frames = dropped.load();
  stats.elapsed_seconds = std::chrono::duration<double>(Clock::now() - wall_start).count();
  if (reader_error && stats.stop_reason == "source error") {
    try {
      std::rethrow_exception(reader_error);
    } catch (const std::exception& e) {
      stats.stop_reason = std::string("source error: ") + e.what();
    }
  }
  return stats;
}

// ---- publish messages ----------------------------------------------------

std::string prediction_json(const PredictionEvent& e) {
  nlohmann::json j{{"type", "prediction"},
                   {"seq", e.sequence},
                   {"t", e.t},
                   {"window_end", e.window_end_sample},
                   {"p", e.probability},
                   {"label", to_string(e.label)},
                   {"threshold", e.threshold},
                   {"latency_us",
                    {{"resample", e.latency.resample_us},
                     {"filter", e.latency.filter_us},
                     {"features", e.latency.features_us},
                     {"standardize", e.latency.standardize_us},
                     {"infer", e.latency.infer_us},
                     {"total", e.latency.total_us}}},
                   {"masked", e.masked},
                   {"flags", e.flags}};
  return j.dump();
}

std::string alert_json(const AlertTransition& a) {
  return nlohmann::json{{"type", "alert"}, {"active", a.active}, {"t", a.t}, {"since", a.since}}.dump();
}

std::string control_echo_json(const ControlMessage& m, const SessionSettings& s) {
  nlohmann::json j{{"type", "control"},
                   {"op", to_string(m.op)},
                   {"settings", {{"threshold", s.threshold}, {"sustain", s.sustain_seconds}, {"paused", s.paused}}}};
  if (m.op == ControlOp::SetThreshold || m.op == ControlOp::SetSustain) j["value"] = m.value;
  return j.dump();
}

std::string gap_json(std::size_t dropped) { return nlohmann::json{{"type", "gap"}, {"dropped", dropped}}.dump(); }

}  // namespace painscope
