#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "painscope/features.hpp"
#include "painscope/matrix.hpp"
#include "painscope/parallel.hpp"
#include "painscope/trees.hpp"

namespace painscope {

enum class AlgorithmId : std::uint8_t {
  SvmRbf,
  Knn,
  RandomForest,
  RegGradBoost,
  LogisticRegression,
  LinearDiscriminant,
  GradBoost,
  GaussianNb,
};

inline constexpr AlgorithmId kAllAlgorithms[] = {
    AlgorithmId::SvmRbf,       AlgorithmId::Knn,        AlgorithmId::RandomForest,
    AlgorithmId::RegGradBoost, AlgorithmId::LogisticRegression, AlgorithmId::LinearDiscriminant,
    AlgorithmId::GradBoost,    AlgorithmId::GaussianNb,
};

std::string_view to_string(AlgorithmId id);
/// Accepts the snake_case id ("svm_rbf", "reg_grad_boost", ...). Throws UnknownAlgorithm.
AlgorithmId parse_algorithm(std::string_view name);

/// Keyed hyperparameters. Every key has a pinned default; unknown keys and
/// unparsable values are rejected with InvalidArgument.
class Hyperparams {
public:
  static Hyperparams defaults(AlgorithmId id);

  AlgorithmId algorithm() const noexcept { return algorithm_; }
  void set(std::string_view key, std::string_view value);
  /// "key=value" form, as given on the command line.
  void set_assignment(std::string_view assignment);

  const std::string& text(std::string_view key) const;
  double number(std::string_view key) const;
  std::size_t count(std::string_view key) const;

  const std::map<std::string, std::string, std::less<>>& values() const noexcept { return values_; }
  bool operator==(const Hyperparams&) const = default;

private:
  AlgorithmId algorithm_ = AlgorithmId::SvmRbf;
  std::map<std::string, std::string, std::less<>> values_;
};

struct SvmParams {
  std::size_t dims = 0;
  Matrix support_vectors;        // n_sv × d
  std::vector<double> coef;      // α_i y_i
  double bias = 0.0;
  double gamma = 0.0;
  double platt_a = -1.0;         // P(high) = 1 / (1 + exp(A·f + B))
  double platt_b = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
  bool operator==(const SvmParams&) const = default;
};

struct KnnParams {
  std::size_t k = 5;
  Matrix train;
  std::vector<std::uint8_t> labels;
  bool operator==(const KnnParams&) const = default;
};

struct EnsembleParams {
  bool boosted = false;     // boosted: σ(base + Σ leaf); forest: mean leaf class fraction
  double base_score = 0.0;  // initial log-odds for boosted ensembles
  std::vector<Tree> trees;
  bool operator==(const EnsembleParams&) const = default;
};

struct LinearParams {
  std::vector<double> weights;  // P(high) = σ(w·x + b)
  double bias = 0.0;
  bool operator==(const LinearParams&) const = default;
};

struct NaiveBayesParams {
  std::vector<double> mean[2];
  std::vector<double> var[2];
  double log_prior[2] = {0.0, 0.0};
  double epsilon = 0.0;
  bool operator==(const NaiveBayesParams&) const = default;
};

using ModelParams = std::variant<std::monostate, SvmParams, KnnParams, EnsembleParams, LinearParams, NaiveBayesParams>;

struct TrainMeta {
  std::uint64_t seed = 0;
  std::string fold_id;
  double train_ms = 0.0;
  std::vector<double> loss_history;  // per boosting round / solver iteration
  bool operator==(const TrainMeta&) const = default;
};

class TrainedModel {
public:
  AlgorithmId algorithm = AlgorithmId::SvmRbf;
  Hyperparams hyperparams;
  ModelParams params;
  StandardizationState standardization;
  std::string manifest_hash;
  TrainMeta meta;

  bool fitted() const noexcept { return !std::holds_alternative<std::monostate>(params); }
  std::size_t dims() const;

  /// Probability of high pain for an already standardized vector.
  double proba_standardized(std::span<const double> x) const;
  /// Raw decision value: SVM margin, log-odds for linear/boosted models,
  /// probability otherwise.
  double decision_standardized(std::span<const double> x) const;
  std::vector<double> proba_standardized(const Matrix& rows, ExecPolicy policy = ExecPolicy::Parallel) const;

  bool operator==(const TrainedModel&) const = default;
};

/// X must already be standardized; y holds 0 (low) / 1 (high).
/// Throws TooFewRows (< 10), SingleClassData, NonFiniteFeature.
TrainedModel train(const Hyperparams& hp, const Matrix& x, std::span<const std::uint8_t> y, std::uint64_t seed,
                   ExecPolicy policy = ExecPolicy::Parallel);

/// Standardizes `values` with the model's state and returns P(high).
/// Throws NotFitted, ManifestMismatch (when both hashes are set and differ).
double predict_proba(const TrainedModel& model, std::span<const double> raw_values,
                     std::string_view manifest_hash = {});
double predict_proba(const TrainedModel& model, const FeatureVector& fv);
PainLabel predict(const TrainedModel& model, const FeatureVector& fv, double threshold = 0.5);

/// Fits Platt's sigmoid P = 1/(1+exp(A f + B)) to decision values with the
/// regularized targets of Lin, Lin and Weng. Returns {A, B}.
std::pair<double, double> fit_platt(std::span<const double> decision, std::span<const std::uint8_t> y);

/// "scale" gamma: 1 / (d · var(X)) over all entries; 1 when X is constant.
double scale_gamma(const Matrix& x);

// Model file:
//   magic "PSMODEL\0" | u16 version | u8 algorithm | hyperparams | standardization | manifest hash
//   | train meta | algorithm parameters | trailing SHA-256 of everything before it
inline constexpr std::string_view kModelFileMagic{"PSMODEL\0", 8};
inline constexpr std::uint16_t kModelFileVersion = 1;
std::vector<std::uint8_t> serialize(const TrainedModel& model);
/// Throws VersionMismatch for another format version, CorruptPayload otherwise.
TrainedModel deserialize(std::span<const std::uint8_t> bytes);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace painscope
