#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "painscope/features.hpp"
#include "painscope/models.hpp"
#include "painscope/parallel.hpp"

namespace painscope {

// ---- folds ---------------------------------------------------------------

struct Fold {
  std::string held_out;
  std::vector<std::string> train_subjects;
};

struct FoldPlan {
  std::vector<Fold> folds;
  std::vector<std::string> warnings;  // e.g. single-class held-out subjects
};

/// One fold per distinct subject, in sorted subject order. Throws TooFewSubjects (< 3).
FoldPlan plan_lopo(std::span<const std::string> row_subjects, std::span<const PainLabel> row_labels);
FoldPlan plan_lopo(const EpochSet& set);

// ---- metrics -------------------------------------------------------------

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

struct Metrics {
  Confusion confusion;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;  // == sensitivity
  double f1 = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// Positive class is high pain (1). Ratios with a zero denominator are 0.
Metrics compute_metrics(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predicted);

struct ConfidenceInterval {
  double level = 0.95;
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap of the mean of a 0/1 correctness vector, resampling
/// predictions. Throws TooFewPredictions (< 10).
ConfidenceInterval bootstrap_ci(std::span<const std::uint8_t> correct, std::size_t n_resamples = 1000,
                                double level = 0.95, std::uint64_t seed = 0);

enum class ClinicalGrade { Excellent, Good, Acceptable, Limited };
std::string_view to_string(ClinicalGrade grade);

/// Grade thresholds on accuracy (fraction): ≥ 0.88 EXCELLENT, ≥ 0.87 GOOD,
/// ≥ 0.82 ACCEPTABLE, else LIMITED.
ClinicalGrade clinical_grade(double accuracy);
ClinicalGrade clinical_grade(const Metrics& metrics);

// ---- LOPO evaluation -----------------------------------------------------

struct FoldResult {
  std::string held_out;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double accuracy = 0.0;
  std::vector<std::string> train_subjects;  // distinct ids of the rows actually used for training
  StandardizationState standardization;     // fitted on this fold's training rows only
  std::optional<std::string> error;         // training failed; fold excluded from pooled metrics
};

struct Prediction {
  std::string subject;
  std::uint8_t truth = 0;
  double probability = 0.0;
};

struct AlgorithmReport {
  AlgorithmId algorithm = AlgorithmId::SvmRbf;
  Metrics metrics;  // pooled over every successful fold's held-out rows
  ConfidenceInterval ci;
  ClinicalGrade grade = ClinicalGrade::Limited;
  double mean_latency_ms = 0.0;  // single-vector predict_proba, fold-0 model
  std::vector<FoldResult> folds;
  std::map<std::string, double> subject_accuracy;
  std::string best_subject;
  std::string worst_subject;
  std::size_t folds_ok = 0;
  std::vector<Prediction> predictions;
};

struct EvalConfig {
  std::vector<AlgorithmId> algorithms{std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
  std::map<AlgorithmId, Hyperparams> hyperparams;  // overrides; defaults otherwise
  std::uint64_t seed = 20250801;
  std::size_t bootstrap_resamples = 1000;
  double threshold = 0.5;
  std::size_t latency_samples = 200;
  ExecPolicy policy = ExecPolicy::Parallel;
};

struct EvalReport {
  std::string manifest_hash;
  std::uint64_t seed = 0;
  std::size_t rows = 0;
  std::size_t subjects = 0;
  std::vector<std::string> warnings;
  std::vector<AlgorithmReport> algorithms;
};

/// Leave-one-participant-out evaluation. Imputation means and standardization
/// are fitted on each fold's training rows only. Training errors are recorded
/// per fold and the remaining folds continue.
EvalReport run_eval(const FeatureMatrix& data, const EvalConfig& cfg);

/// Training rows and standardized matrices for one fold.
struct FoldData {
  Matrix train_x;
  std::vector<std::uint8_t> train_y;
  std::vector<std::string> train_subjects;
  Matrix test_x;
  std::vector<std::uint8_t> test_y;
  StandardizationState standardization;
};
FoldData prepare_fold(const FeatureMatrix& data, const Fold& fold);

/// Fits standardization on every row, trains, and stamps the manifest hash.
TrainedModel train_model(const FeatureMatrix& data, const Hyperparams& hp, std::uint64_t seed,
                         ExecPolicy policy = ExecPolicy::Parallel);

std::string format_report_table(const EvalReport& report);
std::string report_json(const EvalReport& report);

// ---- importance ----------------------------------------------------------

struct ImportanceEntry {
  std::size_t slot = 0;
  std::string feature;  // "feature/channel/band" from the manifest, or "slot<N>"
  double mean = 0.0;
  double sd = 0.0;
};

struct ImportanceReport {
  std::vector<ImportanceEntry> entries;  // sorted by mean importance, descending
  std::size_t n_repeats = 10;
  std::string metric = "accuracy";
};

/// importance(slot) = baseline accuracy − accuracy with that slot shuffled
/// across rows, averaged over n_repeats shuffles. X is standardized.
ImportanceReport permutation_importance(const TrainedModel& model, const Matrix& x, std::span<const std::uint8_t> y,
                                        std::size_t n_repeats = 10, std::uint64_t seed = 0,
                                        const FeatureManifest* manifest = nullptr,
                                        ExecPolicy policy = ExecPolicy::Parallel);

/// Permutation importance pooled over LOPO folds: every fold's model is scored
/// on its own held-out rows; per-repeat drops are pooled by test size.
ImportanceReport lopo_importance(const FeatureMatrix& data, const Hyperparams& hp, std::size_t n_repeats,
                                 std::uint64_t seed, const FeatureManifest* manifest = nullptr,
                                 ExecPolicy policy = ExecPolicy::Parallel);

std::string format_importance(const ImportanceReport& report, std::size_t top = 15);

// ---- synthetic data ------------------------------------------------------

struct SynthConfig {
  std::size_t n_subjects = 12;
  std::size_t epochs_per_class = 40;
  double fs_hz = 500.0;
  double epoch_seconds = 4.0;
  std::vector<std::string> channels = default_channels();
  double background_uv = 6.0;       // pink-noise RMS per channel
  double alpha_uv = 8.0;            // resting alpha amplitude
  double alpha_suppression = 0.27;  // high-pain fractional α drop at C4
  double theta_boost_uv = 1.15;     // high-pain θ amplitude added at Cz
  double gamma_burst_uv = 2.4;      // high-pain γ amplitude at FCz
  double subject_gain_spread = 0.3; // per-subject amplitude gain in [1−s, 1+s]
  double effect_spread = 0.4;       // per-subject effect multiplier in [1−s, 1+s]
  std::uint64_t seed = 7;
};

/// Continuous multichannel generator: pink background, shared volume-conducted
/// component, resting α and θ, and the three pain signatures, switchable.
class SynthSource {
public:
  SynthSource(const SynthConfig& cfg, std::size_t subject_index, std::uint64_t stream_seed);

  void set_pain(bool high) { pain_ = high; }
  bool pain() const noexcept { return pain_; }
  /// Appends `n` samples per channel (channel-major) at the configured rate.
  Matrix next(std::size_t n);
  double time_seconds() const noexcept { return static_cast<double>(t_) / cfg_.fs_hz; }
  /// Restart the signature envelope clock (stimulus onset).
  void mark_onset() { onset_ = t_; }

private:
  SynthConfig cfg_;
  std::mt19937_64 rng_;
  bool pain_ = false;
  std::uint64_t t_ = 0;
  std::uint64_t onset_ = 0;
  double gain_ = 1.0;
  double effect_ = 1.0;
  double alpha_hz_ = 10.0;
  double epoch_alpha_scale_ = 1.0;
  double epoch_effect_scale_ = 1.0;
  std::vector<double> phase_;
  std::vector<std::array<double, 3>> pink_;
  std::array<double, 3> common_{};
  std::vector<double> alpha_weight_;
  std::ptrdiff_t c4_ = -1, c3_ = -1, cz_ = -1, fcz_ = -1, fz_ = -1;

  double pink_step(std::array<double, 3>& state, double white) const;

public:
  /// Redraws per-epoch variability (α amplitude, effect strength).
  void new_epoch();
};

/// Balanced, labeled EpochSet; bit-identical for the same config.
EpochSet synth_generate(const SynthConfig& cfg, ExecPolicy policy = ExecPolicy::Parallel);

/// Continuous recording of `seconds` with stimulus markers every `isi_seconds`,
/// alternating S30/S70 (signature on during S70 epochs).
RawRecording synth_recording(const SynthConfig& cfg, std::size_t subject_index, double seconds,
                             double isi_seconds = 5.0);

}  // namespace painscope
