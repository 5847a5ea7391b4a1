// Serial reference path vs OpenMP path for the parallel kernels. The second
// benchmark argument selects the policy: 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "painscope/evaluation.hpp"
#include "painscope/features.hpp"
#include "painscope/models.hpp"
#include "painscope/preprocess.hpp"

using namespace painscope;

namespace {

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) ? ExecPolicy::Parallel : ExecPolicy::Serial;
}

void label_policy(benchmark::State& state) {
  state.SetLabel(state.range(0) ? "parallel x" + std::to_string(omp_get_max_threads()) : "serial");
}

const EpochSet& small_set() {
  static const EpochSet set = [] {
    SynthConfig cfg;
    cfg.n_subjects = 2;
    cfg.epochs_per_class = 4;
    return synth_generate(cfg, ExecPolicy::Parallel);
  }();
  return set;
}

const FeatureMatrix& small_features() {
  static const FeatureMatrix fm = [] {
    SynthConfig cfg;
    cfg.n_subjects = 4;
    cfg.epochs_per_class = 15;
    const auto set = synth_generate(cfg, ExecPolicy::Parallel);
    return featurize(set, FeatureConfig::epoch_default(), build_manifest(set.channel_names), ExecPolicy::Parallel);
  }();
  return fm;
}

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Matrix m(rows, cols);
  for (auto& v : m.storage()) v = n01(rng);
  return m;
}

void BM_Featurize(benchmark::State& state) {
  const auto& set = small_set();
  const auto manifest = build_manifest(set.channel_names);
  for (auto _ : state)
    benchmark::DoNotOptimize(featurize(set, FeatureConfig::epoch_default(), manifest, policy_of(state)));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * set.epochs.size()));
  label_policy(state);
}

void BM_PreprocessRecording(benchmark::State& state) {
  SynthConfig cfg;
  const auto rec = synth_recording(cfg, 0, 60.0);
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_recording(rec, PreprocessConfig{}, policy_of(state)));
  label_policy(state);
}

void BM_BatchPredictSvm(benchmark::State& state) {
  const Matrix x = gaussian(2000, kFeatureSlots, 1);
  std::vector<std::uint8_t> y(x.rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(i, 0) + x(i, 1) > 0;
  static const TrainedModel model = train(Hyperparams::defaults(AlgorithmId::SvmRbf), x, y, 1);
  const Matrix q = gaussian(500, kFeatureSlots, 2);
  for (auto _ : state) benchmark::DoNotOptimize(model.proba_standardized(q, policy_of(state)));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * q.rows()));
  label_policy(state);
}

void BM_LopoEvaluation(benchmark::State& state) {
  const auto& fm = small_features();
  EvalConfig cfg;
  cfg.algorithms = {AlgorithmId::LogisticRegression, AlgorithmId::GaussianNb};
  cfg.bootstrap_resamples = 200;
  cfg.latency_samples = 10;
  cfg.policy = policy_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(run_eval(fm, cfg));
  label_policy(state);
}

void BM_PermutationImportance(benchmark::State& state) {
  const auto& fm = small_features();
  const auto st = fit_standardization(fm.values);
  const Matrix x = apply_standardization(st, fm.values);
  std::vector<std::uint8_t> y(fm.labels.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<std::uint8_t>(fm.labels[i]);
  const auto model = train(Hyperparams::defaults(AlgorithmId::Knn), x, y, 1);
  for (auto _ : state) benchmark::DoNotOptimize(permutation_importance(model, x, y, 2, 1, nullptr, policy_of(state)));
  label_policy(state);
}

}  // namespace

BENCHMARK(BM_Featurize)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PreprocessRecording)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchPredictSvm)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LopoEvaluation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PermutationImportance)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
