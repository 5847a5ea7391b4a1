#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "painscope/evaluation.hpp"
#include "painscope/features.hpp"
#include "painscope/models.hpp"
#include "painscope/preprocess.hpp"
#include "painscope/resample.hpp"
#include "painscope/ring_buffer.hpp"
#include "painscope/wire.hpp"

namespace painscope {

// ---- window pipeline -----------------------------------------------------

struct PipelineConfig {
  double source_rate_hz = 128.0;
  double target_rate_hz = 500.0;
  double window_seconds = 1.0;
  double bandpass_lo_hz = 1.0;
  double bandpass_hi_hz = 90.0;
  int bandpass_order = 4;  // per edge, Butterworth
  double notch_hz = 50.0;
  double notch_q = 30.0;
  double mask_z = 3.0;
  std::size_t mask_history = 10;  // ticks of per-channel statistics
  double threshold = 0.5;
  FeatureConfig features = FeatureConfig::realtime_default();
};

struct StageLatency {
  double resample_us = 0.0;
  double filter_us = 0.0;  // band-pass, notch, masking and average reference
  double features_us = 0.0;
  double standardize_us = 0.0;
  double infer_us = 0.0;
  double total_us = 0.0;
};

struct PredictionEvent {
  std::uint64_t sequence = 0;
  double t = 0.0;  // seconds since the loop started (wall or virtual clock); strictly increasing
  std::uint64_t window_end_sample = 0;
  double probability = 0.0;
  PainLabel label = PainLabel::Low;
  double threshold = 0.5;
  StageLatency latency;
  std::vector<std::string> masked;
  std::vector<std::string> flags;  // partial_window, pad_truncate, all_masked, feature_error, paused
  bool has_flag(std::string_view f) const;
};

/// Channel masking from a running median of per-channel log-variance over the
/// last `history` windows: a channel is masked when its median sits more than
/// z robust SDs from the other channels, or when its current window is flat or
/// non-finite.
class ChannelMasker {
public:
  ChannelMasker(std::size_t channels, std::size_t history, double z);
  std::vector<bool> update(const Matrix& window);  // true = usable
  void reset();

private:
  std::size_t channels_;
  std::size_t history_;
  double z_;
  std::vector<std::vector<double>> stats_;  // per channel, ring of log-variances
  std::size_t filled_ = 0;
  std::size_t cursor_ = 0;
};

/// Resample → zero-phase band-pass and notch → mask → average reference →
/// features → standardize → predict, on one ring-buffer snapshot.
class WindowPipeline {
public:
  WindowPipeline(PipelineConfig cfg, std::vector<std::string> channels, std::shared_ptr<const TrainedModel> model);

  const PipelineConfig& config() const noexcept { return cfg_; }
  const std::vector<std::string>& channels() const noexcept { return channels_; }
  const FeatureManifest& manifest() const noexcept { return manifest_; }
  std::size_t window_samples() const noexcept { return window_samples_; }

  void set_threshold(double t) { cfg_.threshold = t; }
  void set_model(std::shared_ptr<const TrainedModel> model);

  /// Resampled and filtered copy of a source-rate window.
  Matrix condition(const Matrix& window) const;
  /// Average reference over usable channels, in place.
  static void average_reference(Matrix& x, const std::vector<bool>& usable);

  /// Full tick. Throws ModelMissing without a model; feature failures yield a
  /// flagged event that repeats the last good probability.
  PredictionEvent tick(const RingBuffer::Window& window, double t);

  /// The feature vector computed by the most recent tick.
  const FeatureVector& last_features() const noexcept { return last_features_; }

  /// Test hook run inside the feature stage (e.g. to simulate a slow stage).
  std::function<void()> feature_hook;

private:
  PipelineConfig cfg_;
  std::vector<std::string> channels_;
  std::shared_ptr<const TrainedModel> model_;
  FeatureManifest manifest_;
  PolyphaseResampler resampler_;
  Sos bandpass_;
  Sos notch_;
  ChannelMasker masker_;
  std::size_t window_samples_;
  FeatureVector last_features_;
  double last_probability_ = 0.0;
  std::uint64_t sequence_ = 0;
};

/// The offline path for one window: the same stages called directly on a
/// recording, with its own masker history. Used to check online/offline
/// equivalence.
class OfflineWindowReference {
public:
  OfflineWindowReference(const PipelineConfig& cfg, std::vector<std::string> channels);
  /// Features of samples [end − window, end) of `rec` (end ≥ window).
  FeatureVector features(const Matrix& source_samples, std::uint64_t end_sample);

private:
  PipelineConfig cfg_;
  std::vector<std::string> channels_;
  FeatureManifest manifest_;
  ChannelMasker masker_;
  std::size_t window_samples_;
  Sos bandpass_;
  Sos notch_;
};

/// 1-s training windows from the synthetic generator, conditioned exactly as
/// the streaming pipeline conditions its snapshots.
FeatureMatrix synth_window_features(const SynthConfig& synth, const PipelineConfig& cfg,
                                    ExecPolicy policy = ExecPolicy::Parallel);

// ---- alerting ------------------------------------------------------------

struct AlertConfig {
  double threshold = 0.80;
  double sustain_seconds = 10.0;
  double hysteresis = 0.05;
  double tick_seconds = 0.125;  // evidence carried by one event
};

struct AlertTransition {
  bool active = false;
  double t = 0.0;
  double since = 0.0;  // activation time of the current or ended episode
};

class AlertEngine {
public:
  explicit AlertEngine(AlertConfig cfg = {}) : cfg_(cfg) {}

  std::optional<AlertTransition> update(double t, double probability);
  bool active() const noexcept { return active_; }
  double streak_seconds() const noexcept { return streak_; }
  const AlertConfig& config() const noexcept { return cfg_; }
  void set_threshold(double t) { cfg_.threshold = t; }
  void set_sustain(double s) { cfg_.sustain_seconds = s; }

private:
  AlertConfig cfg_;
  bool active_ = false;
  double streak_ = 0.0;
  double since_ = 0.0;
};

// ---- sources -------------------------------------------------------------

struct SourceChunk {
  std::uint64_t first_sample = 0;
  MatrixF samples;  // channel × n
};

class StreamSource {
public:
  virtual ~StreamSource() = default;
  virtual const std::vector<std::string>& channels() const = 0;
  virtual double rate_hz() const = 0;
  /// Next chunk; blocks when paced. std::nullopt once the source is closed.
  virtual std::optional<SourceChunk> next() = 0;
  virtual void close() {}
};

/// Paces delivery to the wall clock at `speed` × real time; speed 0 = as fast as possible.
class Pacer {
public:
  explicit Pacer(double rate_hz, double speed) : rate_(rate_hz), speed_(speed) {}
  void wait_for(std::uint64_t sample);

private:
  double rate_;
  double speed_;
  std::optional<std::chrono::steady_clock::time_point> start_;
};

/// Continuous synthetic EEG with the pain signature switched on and off on a
/// fixed schedule.
class SyntheticSource : public StreamSource {
public:
  struct Schedule {
    double off_seconds = 10.0;
    double on_seconds = 10.0;
    bool start_on = false;
  };
  SyntheticSource(const SynthConfig& cfg, Schedule schedule, std::size_t chunk_samples = 8, double speed = 1.0,
                  double max_seconds = 0.0, std::size_t subject_index = 0);
  const std::vector<std::string>& channels() const override { return cfg_.channels; }
  double rate_hz() const override { return cfg_.fs_hz; }
  std::optional<SourceChunk> next() override;
  void close() override { closed_ = true; }
  bool pain_at(std::uint64_t sample) const;

private:
  SynthConfig cfg_;
  Schedule schedule_;
  std::size_t chunk_;
  std::uint64_t limit_;
  SynthSource gen_;
  Pacer pacer_;
  std::uint64_t produced_ = 0;
  std::atomic<bool> closed_{false};
};

/// Replays a recording's samples in chunks (float32 on the wire, as from a device).
class ReplaySource : public StreamSource {
public:
  ReplaySource(const RawRecording& rec, std::size_t chunk_samples = 8, double speed = 1.0);
  const std::vector<std::string>& channels() const override { return channels_; }
  double rate_hz() const override { return rate_; }
  std::optional<SourceChunk> next() override;
  void close() override { closed_ = true; }

private:
  std::vector<std::string> channels_;
  double rate_;
  MatrixF samples_;
  std::size_t chunk_;
  Pacer pacer_;
  std::uint64_t pos_ = 0;
  std::atomic<bool> closed_{false};
};

/// Accepts one TCP connection speaking EEGS frames. The constructor binds and
/// listens; `open()` waits for the peer's hello.
class SocketSource : public StreamSource {
public:
  SocketSource(const std::string& host, std::uint16_t port);
  ~SocketSource() override;
  std::uint16_t port() const noexcept { return port_; }
  void open();
  const std::vector<std::string>& channels() const override { return hello_.channels; }
  double rate_hz() const override { return hello_.rate_hz; }
  std::optional<SourceChunk> next() override;
  void close() override;

private:
  int listen_fd_ = -1;
  int fd_ = -1;
  std::uint16_t port_ = 0;
  HelloFrame hello_;
  FrameDecoder decoder_;
  std::atomic<bool> closed_{false};
};

/// Sends a source's chunks to an EEGS listener (hello, chunks, bye).
void send_stream(StreamSource& source, const std::string& host, std::uint16_t port);

// ---- loop ----------------------------------------------------------------

enum class ClockMode {
  Realtime,  // reader thread + monotonic-clock ticks
  Virtual,   // single thread; tick k consumes source time up to k × tick
};

struct LoopConfig {
  double tick_ms = 125.0;
  double max_seconds = 0.0;  // 0 = until the source closes
  ClockMode clock = ClockMode::Realtime;
  double speed = 1.0;        // realtime clock rate; the deadline scales with it
};

/// Latency distribution in fixed log-spaced buckets so memory stays bounded
/// for arbitrarily long runs.
class LatencyHistogram {
public:
  void add(double us);
  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return count_ ? sum_ / static_cast<double>(count_) : 0.0; }
  double max() const noexcept { return max_; }
  /// Upper edge of the bucket holding the q-quantile (≤ 1.2% above the true value).
  double quantile(double q) const;

private:
  static constexpr std::size_t kBuckets = 1200;  // 1 µs .. 1e6 µs, 200 per decade
  std::array<std::size_t, kBuckets> counts_{};
  std::size_t count_ = 0;
  double sum_ = 0.0;
  double max_ = 0.0;
};

struct LoopStats {
  std::size_t events = 0;
  std::size_t missed_deadlines = 0;
  std::size_t dropped_frames = 0;  // source samples lost (sequence gaps)
  std::size_t partial_windows = 0;
  std::size_t flagged_events = 0;
  std::size_t alerts = 0;
  double elapsed_seconds = 0.0;
  LatencyHistogram latency;
  std::string stop_reason;
};

/// Pending setting changes, applied at the next tick boundary.
class ControlMailbox {
public:
  void post(const ControlMessage& m);
  std::vector<ControlMessage> drain();

private:
  std::mutex mutex_;
  std::vector<ControlMessage> pending_;
};

struct SessionSettings {
  double threshold = 0.8;
  double sustain_seconds = 10.0;
  bool paused = false;
};

struct LoopHooks {
  std::function<void(const PredictionEvent&)> on_event;
  std::function<void(const AlertTransition&)> on_alert;
  std::function<void(const ControlMessage&, const SessionSettings&)> on_control;
  ControlMailbox* mailbox = nullptr;
  AlertEngine* alert = nullptr;
  const std::atomic<bool>* stop = nullptr;
};

LoopStats run_loop(StreamSource& source, WindowPipeline& pipeline, const LoopConfig& cfg, const LoopHooks& hooks = {});

// ---- publish messages ----------------------------------------------------

std::string prediction_json(const PredictionEvent& e);
std::string alert_json(const AlertTransition& a);
std::string control_echo_json(const ControlMessage& m, const SessionSettings& s);
std::string gap_json(std::size_t dropped);

}  // namespace painscope
