#include "painscope/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include "json.hpp"
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "painscope/error.hpp"

namespace painscope {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(seed ^ mix64(a + 0x51ed270b27ULL * (b + 1)));
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

// ---- folds ---------------------------------------------------------------

FoldPlan plan_lopo(std::span<const std::string> row_subjects, std::span<const PainLabel> row_labels) {
  if (row_subjects.size() != row_labels.size())
    throw Error(ErrorKind::InvalidArgument, "subject and label counts differ");
  std::map<std::string, std::array<std::size_t, 2>> per_subject;
  for (std::size_t i = 0; i < row_subjects.size(); ++i)
    ++per_subject[row_subjects[i]][static_cast<std::size_t>(row_labels[i])];
  if (per_subject.size() < 3)
    throw Error(ErrorKind::TooFewSubjects, std::to_string(per_subject.size()) + " distinct subjects, need 3");

  FoldPlan plan;
  for (const auto& [subject, counts] : per_subject) {
    Fold f;
    f.held_out = subject;
    for (const auto& [other, unused] : per_subject)
      if (other != subject) f.train_subjects.push_back(other);
    if (counts[0] == 0 || counts[1] == 0)
      plan.warnings.push_back("subject " + subject + " has a single class; fold kept");
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

FoldPlan plan_lopo(const EpochSet& set) {
  std::vector<std::string> subjects;
  std::vector<PainLabel> labels;
  for (const auto& e : set.epochs) {
    subjects.push_back(e.subject_id);
    labels.push_back(e.label);
  }
  return plan_lopo(subjects, labels);
}

// ---- metrics -------------------------------------------------------------

Metrics compute_metrics(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::InvalidArgument, "truth and prediction lengths differ");
  Metrics m;
  auto& c = m.confusion;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i]) predicted[i] ? ++c.tp : ++c.fn;
    else predicted[i] ? ++c.fp : ++c.tn;
  }
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  m.accuracy = ratio(d(c.tp + c.tn), d(c.total()));
  m.precision = ratio(d(c.tp), d(c.tp + c.fp));
  m.recall = ratio(d(c.tp), d(c.tp + c.fn));
  m.sensitivity = m.recall;
  m.specificity = ratio(d(c.tn), d(c.tn + c.fp));
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

ConfidenceInterval bootstrap_ci(std::span<const std::uint8_t> correct, std::size_t n_resamples, double level,
                                std::uint64_t seed) {
  if (correct.size() < 10)
    throw Error(ErrorKind::TooFewPredictions, std::to_string(correct.size()) + " predictions, need 10");
  if (!(level > 0.0 && level < 1.0) || n_resamples == 0)
    throw Error(ErrorKind::InvalidArgument, "bootstrap needs 0 < level < 1 and at least one resample");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, correct.size() - 1);
  std::vector<double> means(n_resamples);
  for (auto& m : means) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < correct.size(); ++i) hits += correct[pick(rng)] ? 1 : 0;
    m = static_cast<double>(hits) / static_cast<double>(correct.size());
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  return {level, quantile_sorted(means, tail), quantile_sorted(means, 1.0 - tail)};
}

std::string_view to_string(ClinicalGrade grade) {
  switch (grade) {
    case ClinicalGrade::Excellent: return "EXCELLENT";
    case ClinicalGrade::Good: return "GOOD";
    case ClinicalGrade::Acceptable: return "ACCEPTABLE";
    case ClinicalGrade::Limited: return "LIMITED";
  }
  return "LIMITED";
}

ClinicalGrade clinical_grade(double accuracy) {
  if (accuracy >= 0.88) return ClinicalGrade::Excellent;
  if (accuracy >= 0.87) return ClinicalGrade::Good;
  if (accuracy >= 0.82) return ClinicalGrade::Acceptable;
  return ClinicalGrade::Limited;
}

ClinicalGrade clinical_grade(const Metrics& metrics) { return clinical_grade(metrics.accuracy); }

// ---- LOPO ----------------------------------------------------------------

TrainedModel train_model(const FeatureMatrix& data, const Hyperparams& hp, std::uint64_t seed, ExecPolicy policy) {
  const StandardizationState state = fit_standardization(data.values);
  std::vector<std::uint8_t> y(data.labels.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<std::uint8_t>(data.labels[i]);
  TrainedModel m = train(hp, apply_standardization(state, data.values), y, seed, policy);
  m.standardization = state;
  m.manifest_hash = data.manifest_hash;
  return m;
}

FoldData prepare_fold(const FeatureMatrix& data, const Fold& fold) {
  const std::size_t d = data.values.cols();
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < data.rows(); ++i)
    (data.subjects[i] == fold.held_out ? test_rows : train_rows).push_back(i);

  const auto gather = [&](const std::vector<std::size_t>& rows) {
    Matrix m(rows.size(), d);
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(data.values.row(rows[r]).data(), d, m.row(r).data());
    return m;
  };
  FoldData f;
  const Matrix train_raw = gather(train_rows);
  f.standardization = fit_standardization(train_raw);
  f.train_x = apply_standardization(f.standardization, train_raw);
  f.test_x = apply_standardization(f.standardization, gather(test_rows));
  std::set<std::string> seen;
  for (auto r : train_rows) {
    f.train_y.push_back(static_cast<std::uint8_t>(data.labels[r]));
    seen.insert(data.subjects[r]);
  }
  for (auto r : test_rows) f.test_y.push_back(static_cast<std::uint8_t>(data.labels[r]));
  f.train_subjects.assign(seen.begin(), seen.end());
  return f;
}

EvalReport run_eval(const FeatureMatrix& data, const EvalConfig& cfg) {
  if (data.subjects.size() != data.rows() || data.labels.size() != data.rows())
    throw Error(ErrorKind::InvalidArgument, "feature matrix rows, subjects and labels disagree");
  const FoldPlan plan = plan_lopo(data.subjects, data.labels);

  EvalReport report;
  report.manifest_hash = data.manifest_hash;
  report.seed = cfg.seed;
  report.rows = data.rows();
  report.subjects = plan.folds.size();
  report.warnings = plan.warnings;

  const std::size_t n_folds = plan.folds.size();
  std::vector<FoldData> folds(n_folds);
  for_each_index(n_folds, cfg.policy, [&](std::size_t f) { folds[f] = prepare_fold(data, plan.folds[f]); });

  // Folds run in parallel; each model trains serially inside its fold.
  constexpr ExecPolicy inner = ExecPolicy::Serial;

  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
    const AlgorithmId id = cfg.algorithms[a];
    const auto found = cfg.hyperparams.find(id);
    const Hyperparams hp = found != cfg.hyperparams.end() ? found->second : Hyperparams::defaults(id);

    AlgorithmReport ar;
    ar.algorithm = id;
    ar.folds.resize(n_folds);
    std::vector<std::optional<TrainedModel>> models(n_folds);
    std::vector<std::vector<double>> proba(n_folds);

    for_each_index(n_folds, cfg.policy, [&](std::size_t f) {
      const FoldData& fd = folds[f];
      FoldResult& fr = ar.folds[f];
      fr.held_out = plan.folds[f].held_out;
      fr.n_train = fd.train_y.size();
      fr.n_test = fd.test_y.size();
      fr.train_subjects = fd.train_subjects;
      fr.standardization = fd.standardization;
      try {
        TrainedModel m = train(hp, fd.train_x, fd.train_y, derive_seed(cfg.seed, f, a), inner);
        m.standardization = fd.standardization;
        m.manifest_hash = data.manifest_hash;
        m.meta.fold_id = fr.held_out;
        proba[f] = m.proba_standardized(fd.test_x, inner);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < fr.n_test; ++i)
          hits += static_cast<std::uint8_t>(proba[f][i] >= cfg.threshold) == fd.test_y[i] ? 1 : 0;
        fr.accuracy = ratio(static_cast<double>(hits), static_cast<double>(fr.n_test));
        models[f] = std::move(m);
      } catch (const Error& e) {
        fr.error = e.what();
      }
    });

    std::vector<std::uint8_t> truth, predicted, correct;
    for (std::size_t f = 0; f < n_folds; ++f) {
      if (ar.folds[f].error) continue;
      ++ar.folds_ok;
      for (std::size_t i = 0; i < folds[f].test_y.size(); ++i) {
        const auto y = folds[f].test_y[i];
        const auto p = static_cast<std::uint8_t>(proba[f][i] >= cfg.threshold);
        truth.push_back(y);
        predicted.push_back(p);
        correct.push_back(p == y);
        ar.predictions.push_back({ar.folds[f].held_out, y, proba[f][i]});
      }
      ar.subject_accuracy[ar.folds[f].held_out] = ar.folds[f].accuracy;
    }
    ar.metrics = compute_metrics(truth, predicted);
    ar.grade = clinical_grade(ar.metrics);
    if (correct.size() >= 10) ar.ci = bootstrap_ci(correct, cfg.bootstrap_resamples, 0.95, cfg.seed);
    if (!ar.subject_accuracy.empty()) {
      const auto by_acc = [](const auto& l, const auto& r) { return l.second < r.second; };
      ar.best_subject = std::max_element(ar.subject_accuracy.begin(), ar.subject_accuracy.end(), by_acc)->first;
      ar.worst_subject = std::min_element(ar.subject_accuracy.begin(), ar.subject_accuracy.end(), by_acc)->first;
    }

    // Latency: one raw vector at a time through standardization and scoring.
    for (std::size_t f = 0; f < n_folds; ++f) {
      if (!models[f]) continue;
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < data.rows() && rows.size() < cfg.latency_samples; ++i)
        if (data.subjects[i] == ar.folds[f].held_out) rows.push_back(i);
      if (rows.empty()) continue;
      double sink = 0.0;
      const auto t0 = std::chrono::steady_clock::now();
      for (auto r : rows) sink += predict_proba(*models[f], data.values.row(r));
      const auto t1 = std::chrono::steady_clock::now();
      ar.mean_latency_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(rows.size());
      if (sink < -1.0) ar.mean_latency_ms = 0.0;  // keeps the loop observable
      break;
    }
    report.algorithms.push_back(std::move(ar));
  }
  return report;
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream s;
  s << "manifest " << report.manifest_hash << "  seed " << report.seed << "  rows " << report.rows << "  subjects "
    << report.subjects << "\n";
  s << std::left << std::setw(22) << "algorithm" << std::right << std::setw(8) << "F1" << std::setw(10) << "Prec"
    << std::setw(9) << "Recall" << std::setw(9) << "Acc" << std::setw(18) << "95% CI" << std::setw(11) << "ms/pred"
    << std::setw(8) << "folds" << "  grade\n";
  s << std::fixed;
  for (const auto& a : report.algorithms) {
    std::ostringstream ci;
    ci << std::fixed << std::setprecision(2) << 100 * a.ci.lo << "-" << 100 * a.ci.hi;
    s << std::left << std::setw(22) << to_string(a.algorithm) << std::right << std::setprecision(2) << std::setw(8)
      << 100 * a.metrics.f1 << std::setw(10) << 100 * a.metrics.precision << std::setw(9) << 100 * a.metrics.recall
      << std::setw(9) << 100 * a.metrics.accuracy << std::setw(18) << ci.str() << std::setw(11) << std::setprecision(3)
      << a.mean_latency_ms << std::setw(5) << a.folds_ok << "/" << std::left << std::setw(2) << a.folds.size() << "  "
      << to_string(a.grade) << "\n";
  }
  for (const auto& w : report.warnings) s << "warning: " << w << "\n";
  for (const auto& a : report.algorithms)
    for (const auto& f : a.folds)
      if (f.error) s << "fold error: " << to_string(a.algorithm) << " / " << f.held_out << ": " << *f.error << "\n";
  return s.str();
}

std::string report_json(const EvalReport& report) {
  using nlohmann::json;
  json j;
  j["manifest_hash"] = report.manifest_hash;
  j["seed"] = report.seed;
  j["rows"] = report.rows;
  j["subjects"] = report.subjects;
  j["warnings"] = report.warnings;
  j["algorithms"] = json::array();
  for (const auto& a : report.algorithms) {
    json ja;
    ja["algorithm"] = to_string(a.algorithm);
    ja["accuracy"] = a.metrics.accuracy;
    ja["precision"] = a.metrics.precision;
    ja["recall"] = a.metrics.recall;
    ja["f1"] = a.metrics.f1;
    ja["sensitivity"] = a.metrics.sensitivity;
    ja["specificity"] = a.metrics.specificity;
    const auto& c = a.metrics.confusion;
    ja["confusion"] = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
    ja["ci"] = {{"level", a.ci.level}, {"lo", a.ci.lo}, {"hi", a.ci.hi}};
    ja["grade"] = to_string(a.grade);
    ja["mean_latency_ms"] = a.mean_latency_ms;
    ja["folds_ok"] = a.folds_ok;
    ja["best_subject"] = a.best_subject;
    ja["worst_subject"] = a.worst_subject;
    ja["subject_accuracy"] = a.subject_accuracy;
    json folds = json::array();
    for (const auto& f : a.folds) {
      json jf{{"held_out", f.held_out}, {"n_train", f.n_train}, {"n_test", f.n_test}, {"accuracy", f.accuracy}};
      if (f.error) jf["error"] = *f.error;
      folds.push_back(std::move(jf));
    }
    ja["folds"] = std::move(folds);
    j["algorithms"].push_back(std::move(ja));
  }
  return j.dump(2);
}

// ---- importance ----------------------------------------------------------

namespace {

// Scores every row with slot j replaced by values[perm[i]] of the same slot.
// Distance-based models update each cached squared distance by the change in
// the one coordinate instead of recomputing it.
class PermutedScorer {
public:
  PermutedScorer(const TrainedModel& model, const Matrix& x) : model_(model), x_(x) {
    if (const auto* p = std::get_if<SvmParams>(&model.params)) cache(p->support_vectors);
    else if (const auto* k = std::get_if<KnnParams>(&model.params)) cache(k->train);
  }

  std::size_t correct(std::size_t j, std::span<const std::size_t> perm, std::span<const std::uint8_t> y,
                      std::vector<double>& scratch) const {
    const std::size_t n = x_.rows();
    std::size_t hits = 0;
    if (const auto* p = std::get_if<SvmParams>(&model_.params)) {
      for (std::size_t i = 0; i < n; ++i) {
        const double xn = x_(perm[i], j), xo = x_(i, j);
        double f = p->bias;
        const double* dist = dist_.row(i).data();
        for (std::size_t s = 0; s < p->coef.size(); ++s) {
          const double sv = p->support_vectors(s, j);
          const double dn = xn - sv, dold = xo - sv;
          f += p->coef[s] * std::exp(-p->gamma * (dist[s] + dn * dn - dold * dold));
        }
        const double prob = 1.0 / (1.0 + std::exp(p->platt_a * f + p->platt_b));
        hits += static_cast<std::uint8_t>(prob >= 0.5) == y[i];
      }
      return hits;
    }
    if (const auto* k = std::get_if<KnnParams>(&model_.params)) {
      std::vector<std::pair<double, std::uint32_t>> nd(k->train.rows());
      for (std::size_t i = 0; i < n; ++i) {
        const double xn = x_(perm[i], j), xo = x_(i, j);
        const double* dist = dist_.row(i).data();
        for (std::size_t r = 0; r < nd.size(); ++r) {
          const double t = k->train(r, j);
          const double dn = xn - t, dold = xo - t;
          nd[r] = {dist[r] + dn * dn - dold * dold, static_cast<std::uint32_t>(r)};
        }
        std::partial_sort(nd.begin(), nd.begin() + static_cast<std::ptrdiff_t>(k->k), nd.end());
        double votes = 0.0;
        for (std::size_t q = 0; q < k->k; ++q) votes += k->labels[nd[q].second];
        hits += static_cast<std::uint8_t>(votes / static_cast<double>(k->k) >= 0.5) == y[i];
      }
      return hits;
    }
    scratch.resize(x_.cols());
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(x_.row(i).data(), x_.cols(), scratch.data());
      scratch[j] = x_(perm[i], j);
      hits += static_cast<std::uint8_t>(model_.proba_standardized(scratch) >= 0.5) == y[i];
    }
    return hits;
  }

private:
  void cache(const Matrix& ref) {
    dist_ = Matrix(x_.rows(), ref.rows());
    for (std::size_t i = 0; i < x_.rows(); ++i)
      for (std::size_t r = 0; r < ref.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < x_.cols(); ++c) {
          const double diff = ref(r, c) - x_(i, c);
          s += diff * diff;
        }
        dist_(i, r) = s;
      }
  }

  const TrainedModel& model_;
  const Matrix& x_;
  Matrix dist_;
};

std::string slot_name(const FeatureManifest* manifest, std::size_t j) {
  if (manifest && j < manifest->entries.size()) {
    const auto& e = manifest->entries[j];
    return e.feature + "/" + e.channel + "/" + e.band_or_window;
  }
  return "slot" + std::to_string(j);
}

// Per-slot, per-repeat correct counts on one evaluation set.
std::vector<std::vector<std::size_t>> permuted_hits(const TrainedModel& model, const Matrix& x,
                                                    std::span<const std::uint8_t> y, std::size_t n_repeats,
                                                    std::uint64_t seed, ExecPolicy policy) {
  const PermutedScorer scorer(model, x);
  std::vector<std::vector<std::size_t>> hits(x.cols(), std::vector<std::size_t>(n_repeats));
  for_each_index(x.cols(), policy, [&](std::size_t j) {
    std::mt19937_64 rng(derive_seed(seed, j));
    std::vector<std::size_t> perm(x.rows());
    std::vector<double> scratch;
    for (std::size_t r = 0; r < n_repeats; ++r) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      hits[j][r] = scorer.correct(j, perm, y, scratch);
    }
  });
  return hits;
}

std::size_t baseline_hits(const TrainedModel& model, const Matrix& x, std::span<const std::uint8_t> y,
                          ExecPolicy policy) {
  const auto p = model.proba_standardized(x, policy);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hits += static_cast<std::uint8_t>(p[i] >= 0.5) == y[i];
  return hits;
}

ImportanceReport summarize(const std::vector<std::vector<double>>& drops, const FeatureManifest* manifest,
                           std::size_t n_repeats) {
  ImportanceReport rep;
  rep.n_repeats = n_repeats;
  for (std::size_t j = 0; j < drops.size(); ++j) {
    const auto& d = drops[j];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    rep.entries.push_back({j, slot_name(manifest, j), mean, std::sqrt(ss / static_cast<double>(d.size()))});
  }
  std::stable_sort(rep.entries.begin(), rep.entries.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.mean > b.mean; });
  return rep;
}

}  // namespace

ImportanceReport permutation_importance(const TrainedModel& model, const Matrix& x, std::span<const std::uint8_t> y,
                                        std::size_t n_repeats, std::uint64_t seed, const FeatureManifest* manifest,
                                        ExecPolicy policy) {
  if (!model.fitted()) throw Error(ErrorKind::NotFitted, "model is not fitted");
  if (x.rows() != y.size() || x.rows() == 0) throw Error(ErrorKind::InvalidArgument, "rows and labels disagree");
  if (n_repeats == 0) throw Error(ErrorKind::InvalidArgument, "n_repeats must be positive");
  const double n = static_cast<double>(x.rows());
  const double base = static_cast<double>(baseline_hits(model, x, y, policy)) / n;
  const auto hits = permuted_hits(model, x, y, n_repeats, seed, policy);
  std::vector<std::vector<double>> drops(x.cols(), std::vector<double>(n_repeats));
  for (std::size_t j = 0; j < x.cols(); ++j)
    for (std::size_t r = 0; r < n_repeats; ++r) drops[j][r] = base - static_cast<double>(hits[j][r]) / n;
  return summarize(drops, manifest, n_repeats);
}

ImportanceReport lopo_importance(const FeatureMatrix& data, const Hyperparams& hp, std::size_t n_repeats,
                                 std::uint64_t seed, const FeatureManifest* manifest, ExecPolicy policy) {
  if (n_repeats == 0) throw Error(ErrorKind::InvalidArgument, "n_repeats must be positive");
  const FoldPlan plan = plan_lopo(data.subjects, data.labels);
  const std::size_t d = data.values.cols();
  std::vector<std::vector<double>> lost(d, std::vector<double>(n_repeats, 0.0));
  std::size_t total = 0;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const FoldData fd = prepare_fold(data, plan.folds[f]);
    TrainedModel m;
    try {
      m = train(hp, fd.train_x, fd.train_y, derive_seed(seed, f, 0xF0), policy);
    } catch (const Error&) {
      continue;  // same policy as run_eval: a failed fold is skipped
    }
    const auto base = baseline_hits(m, fd.test_x, fd.test_y, policy);
    const auto hits = permuted_hits(m, fd.test_x, fd.test_y, n_repeats, derive_seed(seed, f), policy);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t r = 0; r < n_repeats; ++r)
        lost[j][r] += static_cast<double>(base) - static_cast<double>(hits[j][r]);
    total += fd.test_y.size();
  }
  if (total == 0) throw Error(ErrorKind::TooFewPredictions, "no fold produced predictions");
  for (auto& row : lost)
    for (auto& v : row) v /= static_cast<double>(total);
  return summarize(lost, manifest, n_repeats);
}

std::string format_importance(const ImportanceReport& report, std::size_t top) {
  std::ostringstream s;
  s << "rank  slot  importance      sd  feature\n" << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < std::min(top, report.entries.size()); ++i) {
    const auto& e = report.entries[i];
    s << std::setw(4) << i + 1 << std::setw(6) << e.slot << std::setw(12) << e.mean << std::setw(8) << e.sd << "  "
      << e.feature << "\n";
  }
  return s.str();
}

}  // namespace painscope
