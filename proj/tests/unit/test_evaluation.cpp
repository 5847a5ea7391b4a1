#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "painscope/error.hpp"
#include "painscope/evaluation.hpp"

using namespace painscope;

namespace {

// Rows drawn from two Gaussian clouds that differ only in slot 0.
FeatureMatrix toy_matrix(std::size_t subjects, std::size_t per_subject, std::size_t dims, double separation,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  FeatureMatrix fm;
  fm.values = Matrix(subjects * per_subject, dims);
  for (std::size_t s = 0; s < subjects; ++s)
    for (std::size_t e = 0; e < per_subject; ++e) {
      const std::size_t r = s * per_subject + e;
      const bool high = e % 2 == 1;
      fm.subjects.push_back("s" + std::to_string(s));
      fm.labels.push_back(high ? PainLabel::High : PainLabel::Low);
      for (std::size_t j = 0; j < dims; ++j) fm.values(r, j) = n01(rng);
      fm.values(r, 0) += high ? separation / 2 : -separation / 2;
    }
  return fm;
}

std::vector<std::uint8_t> bits(const FeatureMatrix& fm) {
  std::vector<std::uint8_t> y;
  for (auto l : fm.labels) y.push_back(static_cast<std::uint8_t>(l));
  return y;
}

}  // namespace

TEST_CASE("plan_lopo holds out each subject once") {
  std::vector<std::string> subj{"a", "a", "b", "b", "c", "c"};
  std::vector<PainLabel> lab{PainLabel::Low, PainLabel::High, PainLabel::Low,
                             PainLabel::High, PainLabel::Low, PainLabel::High};
  const auto plan = plan_lopo(subj, lab);
  REQUIRE(plan.folds.size() == 3);
  for (const auto& f : plan.folds) {
    CHECK(f.train_subjects.size() == 2);
    CHECK(std::find(f.train_subjects.begin(), f.train_subjects.end(), f.held_out) == f.train_subjects.end());
  }
  CHECK(plan.warnings.empty());

  lab[4] = PainLabel::High;
  const auto warned = plan_lopo(subj, lab);
  CHECK(warned.folds.size() == 3);
  CHECK(warned.warnings.size() == 1);

  std::vector<std::string> two{"a", "b"};
  std::vector<PainLabel> two_lab{PainLabel::Low, PainLabel::High};
  try {
    plan_lopo(two, two_lab);
    FAIL("expected TooFewSubjects");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewSubjects);
  }

  std::vector<std::string> many;
  std::vector<PainLabel> many_lab;
  for (int s = 0; s < 52; ++s)
    for (int e = 0; e < 2; ++e) {
      many.push_back("sub" + std::to_string(s));
      many_lab.push_back(e ? PainLabel::High : PainLabel::Low);
    }
  CHECK(plan_lopo(many, many_lab).folds.size() == 52);
}

TEST_CASE("metric identities on random prediction sets") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<std::uint8_t> t(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = rng() & 1;
      p[i] = rng() & 1;
    }
    const auto m = compute_metrics(t, p);
    const auto& c = m.confusion;
    CHECK(c.total() == n);
    CHECK(m.accuracy == doctest::Approx(double(c.tp + c.tn) / double(n)).epsilon(1e-12));
    if (m.precision + m.recall > 0)
      CHECK(std::abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)) < 1e-12);
    CHECK(m.recall == m.sensitivity);
  }
  const std::vector<std::uint8_t> zeros(10, 0);
  const auto m = compute_metrics(zeros, zeros);
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.specificity == 1.0);
}

TEST_CASE("bootstrap confidence intervals") {
  const std::vector<std::uint8_t> all(50, 1);
  const auto ci = bootstrap_ci(all, 1000, 0.95, 3);
  CHECK(ci.lo == 1.0);
  CHECK(ci.hi == 1.0);

  std::vector<std::uint8_t> half(1000);
  for (std::size_t i = 0; i < half.size(); ++i) half[i] = i % 2;
  const auto h = bootstrap_ci(half, 1000, 0.95, 5);
  CHECK(h.lo <= 0.5);
  CHECK(h.hi >= 0.5);
  CHECK(h.hi - h.lo < 0.07);
  // Normal approximation: 2 × 1.96 × sqrt(0.25 / 1000) ≈ 0.062.
  CHECK(h.hi - h.lo == doctest::Approx(2 * 1.96 * std::sqrt(0.25 / 1000)).epsilon(0.15));

  CHECK(bootstrap_ci(half, 200, 0.95, 9).lo == bootstrap_ci(half, 200, 0.95, 9).lo);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint8_t> v(20 + rng() % 300);
    for (auto& b : v) b = (rng() % 100) < 80;
    const double point = std::count(v.begin(), v.end(), 1) / double(v.size());
    const auto c = bootstrap_ci(v, 500, 0.95, trial);
    CHECK(c.lo <= point);
    CHECK(point <= c.hi);
  }

  try {
    bootstrap_ci(std::vector<std::uint8_t>(9, 1));
    FAIL("expected TooFewPredictions");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::TooFewPredictions);
  }
}

TEST_CASE("clinical grade reproduces the published rows") {
  const std::pair<double, ClinicalGrade> rows[] = {
      {0.8888, ClinicalGrade::Excellent}, {0.8854, ClinicalGrade::Excellent}, {0.8786, ClinicalGrade::Good},
      {0.8754, ClinicalGrade::Good},      {0.8721, ClinicalGrade::Good},      {0.8654, ClinicalGrade::Acceptable},
      {0.8554, ClinicalGrade::Acceptable}, {0.8182, ClinicalGrade::Limited},
  };
  for (const auto& [acc, grade] : rows) CHECK(to_string(clinical_grade(acc)) == to_string(grade));
}

TEST_CASE("run_eval keeps folds disjoint and standardizes per fold") {
  // Unbalanced subject sizes make every fold's training mean different.
  FeatureMatrix fm;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01(0.0, 1.0);
  const std::size_t sizes[] = {20, 30, 40, 50};
  std::size_t rows = 0;
  for (auto s : sizes) rows += s;
  fm.values = Matrix(rows, 4);
  std::size_t r = 0;
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t e = 0; e < sizes[s]; ++e, ++r) {
      const bool high = e % 2;
      fm.subjects.push_back("p" + std::to_string(s));
      fm.labels.push_back(high ? PainLabel::High : PainLabel::Low);
      for (std::size_t j = 0; j < 4; ++j) fm.values(r, j) = n01(rng) + 0.3 * static_cast<double>(s);
      fm.values(r, 1) += high ? 1.5 : -1.5;
    }
  EvalConfig cfg;
  cfg.algorithms = {AlgorithmId::LogisticRegression, AlgorithmId::GaussianNb};
  const auto rep = run_eval(fm, cfg);
  REQUIRE(rep.algorithms.size() == 2);
  for (const auto& a : rep.algorithms) {
    CHECK(a.folds_ok == 4);
    CHECK(a.predictions.size() == rows);
    for (const auto& f : a.folds) {
      CHECK(std::find(f.train_subjects.begin(), f.train_subjects.end(), f.held_out) == f.train_subjects.end());
      CHECK(f.n_train + f.n_test == rows);
    }
    for (std::size_t i = 0; i < a.folds.size(); ++i)
      for (std::size_t j = i + 1; j < a.folds.size(); ++j)
        CHECK(a.folds[i].standardization.mean != a.folds[j].standardization.mean);
    CHECK(a.ci.lo <= a.metrics.accuracy);
    CHECK(a.metrics.accuracy <= a.ci.hi);
    CHECK(a.metrics.accuracy > 0.8);
    CHECK_FALSE(a.best_subject.empty());
  }
  CHECK_FALSE(format_report_table(rep).empty());
  CHECK(report_json(rep).find("\"svm_rbf\"") == std::string::npos);
  CHECK(report_json(rep).find("\"gaussian_nb\"") != std::string::npos);
}

TEST_CASE("leaked label feature gives perfect accuracy for every algorithm") {
  FeatureMatrix fm = toy_matrix(4, 30, 3, 0.0, 8);
  for (std::size_t r = 0; r < fm.rows(); ++r) fm.values(r, 2) = fm.labels[r] == PainLabel::High ? 1.0 : -1.0;
  EvalConfig cfg;
  cfg.hyperparams.emplace(AlgorithmId::RandomForest, [] {
    auto hp = Hyperparams::defaults(AlgorithmId::RandomForest);
    hp.set("n_trees", "50");
    return hp;
  }());
  const auto rep = run_eval(fm, cfg);
  for (const auto& a : rep.algorithms) {
    INFO(to_string(a.algorithm));
    CHECK(a.metrics.accuracy == 1.0);
  }
}

TEST_CASE("fold errors are reported and other folds continue") {
  // One subject holds nearly all rows, so holding it out leaves too few to train on.
  FeatureMatrix fm = toy_matrix(1, 60, 3, 3.0, 2);
  for (int s = 0; s < 2; ++s)
    for (int e = 0; e < 4; ++e) {
      Matrix grown(fm.rows() + 1, 3);
      std::copy(fm.values.storage().begin(), fm.values.storage().end(), grown.storage().begin());
      grown(fm.rows(), 0) = e % 2 ? 1.5 : -1.5;
      fm.values = grown;
      fm.subjects.push_back("small" + std::to_string(s));
      fm.labels.push_back(e % 2 ? PainLabel::High : PainLabel::Low);
    }
  EvalConfig cfg;
  cfg.algorithms = {AlgorithmId::LinearDiscriminant};
  const auto rep = run_eval(fm, cfg);
  const auto& a = rep.algorithms[0];
  CHECK(a.folds_ok == 2);
  std::size_t errors = 0;
  for (const auto& f : a.folds) errors += f.error.has_value();
  CHECK(errors == 1);
  CHECK(a.predictions.size() == 8);
  CHECK(format_report_table(rep).find("fold error") != std::string::npos);
}

TEST_CASE("permutation importance properties") {
  FeatureMatrix fm = toy_matrix(1, 400, 4, 2.0, 21);
  for (std::size_t r = 0; r < fm.rows(); ++r) fm.values(r, 3) = 0.0;  // constant slot
  const auto y = bits(fm);
  const auto hp = Hyperparams::defaults(AlgorithmId::LogisticRegression);
  const auto model = train(hp, fm.values, y, 1);
  const auto rep = permutation_importance(model, fm.values, y, 10, 5);
  REQUIRE(rep.entries.size() == 4);
  CHECK(rep.entries.front().slot == 0);
  for (std::size_t i = 1; i < rep.entries.size(); ++i) CHECK(rep.entries[i - 1].mean >= rep.entries[i].mean);
  for (const auto& e : rep.entries)
    if (e.slot == 3) CHECK(std::abs(e.mean) <= 1e-12);

  SUBCASE("constant slot is exactly neutral for distance models") {
    for (auto id : {AlgorithmId::SvmRbf, AlgorithmId::Knn, AlgorithmId::RandomForest}) {
      const auto m = train(Hyperparams::defaults(id), fm.values, y, 3);
      const auto r = permutation_importance(m, fm.values, y, 3, 7);
      for (const auto& e : r.entries)
        if (e.slot == 3) CHECK(std::abs(e.mean) <= 1e-12);
    }
  }

  SUBCASE("duplicated feature splits the importance") {
    const double solo = [&] {
      for (const auto& e : rep.entries)
        if (e.slot == 0) return e.mean;
      return 0.0;
    }();
    FeatureMatrix dup = fm;
    for (std::size_t r = 0; r < dup.rows(); ++r) dup.values(r, 3) = dup.values(r, 0);
    const auto m2 = train(hp, dup.values, y, 1);
    const auto r2 = permutation_importance(m2, dup.values, y, 10, 5);
    for (const auto& e : r2.entries)
      if (e.slot == 0 || e.slot == 3) CHECK(e.mean < solo);
  }

  SUBCASE("label-shuffled data gives a null ranking") {
    FeatureMatrix noise = toy_matrix(1, 800, 20, 0.0, 33);
    auto yn = bits(noise);
    std::mt19937_64 rng(6);
    std::shuffle(yn.begin(), yn.end(), rng);
    Matrix train_x(400, 20), test_x(400, 20);
    std::vector<std::uint8_t> train_y(yn.begin(), yn.begin() + 400), test_y(yn.begin() + 400, yn.end());
    for (std::size_t r = 0; r < 400; ++r)
      for (std::size_t j = 0; j < 20; ++j) {
        train_x(r, j) = noise.values(r, j);
        test_x(r, j) = noise.values(r + 400, j);
      }
    const auto m = train(hp, train_x, train_y, 2);
    const auto r = permutation_importance(m, test_x, test_y, 10, 8);
    for (const auto& e : r.entries) CHECK(std::abs(e.mean) <= 0.05);
  }

  SUBCASE("serial and parallel paths agree") {
    const auto a = permutation_importance(model, fm.values, y, 4, 9, nullptr, ExecPolicy::Serial);
    const auto b = permutation_importance(model, fm.values, y, 4, 9, nullptr, ExecPolicy::Parallel);
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      CHECK(a.entries[i].slot == b.entries[i].slot);
      CHECK(a.entries[i].mean == b.entries[i].mean);
    }
  }
}

TEST_CASE("svm and knn importance rank the informative slot first") {
  FeatureMatrix fm = toy_matrix(1, 120, 3, 2.0, 17);
  const auto y = bits(fm);
  for (auto id : {AlgorithmId::SvmRbf, AlgorithmId::Knn}) {
    const auto m = train(Hyperparams::defaults(id), fm.values, y, 1);
    const auto rep = permutation_importance(m, fm.values, y, 5, 12);
    CHECK(rep.entries.front().slot == 0);
    CHECK(rep.entries.front().mean > 0.15);
  }
}

TEST_CASE("synthetic generator") {
  SynthConfig cfg;
  cfg.n_subjects = 2;
  cfg.epochs_per_class = 3;
  const auto a = synth_generate(cfg);
  const auto b = synth_generate(cfg, ExecPolicy::Serial);
  REQUIRE(a.epochs.size() == 12);
  CHECK(a.subjects().size() == 2);
  CHECK(a.count(PainLabel::High) == 6);
  CHECK(a.count("synth01", PainLabel::Low) == 3);
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].samples == b.epochs[i].samples);
    CHECK(a.epochs[i].samples.cols() == 2000);
    CHECK(a.epochs[i].samples.rows() == default_channels().size());
  }
  cfg.seed = 8;
  CHECK(synth_generate(cfg).epochs[0].samples != a.epochs[0].samples);
}

TEST_CASE("synthetic signatures appear where they were planted") {
  // Average band amplitudes of high vs low epochs by least-squares power at the tone.
  SynthConfig cfg;
  cfg.n_subjects = 1;
  cfg.epochs_per_class = 20;
  cfg.alpha_suppression = 0.5;
  cfg.theta_boost_uv = 3.0;
  cfg.gamma_burst_uv = 3.0;
  const auto set = synth_generate(cfg);
  const auto& ch = set.channel_names;
  const auto idx = [&](const char* n) { return std::size_t(std::find(ch.begin(), ch.end(), n) - ch.begin()); };
  const auto tone_power = [&](const Epoch& e, std::size_t c, double lo, double hi) {
    // Goertzel-free: DFT bins in [lo, hi].
    const std::size_t n = e.samples.cols();
    double p = 0.0;
    for (double f = lo; f <= hi; f += 0.25) {
      double re = 0, im = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const double w = 2 * M_PI * f * double(k) / e.fs_hz;
        re += e.samples(c, k) * std::cos(w);
        im += e.samples(c, k) * std::sin(w);
      }
      p += re * re + im * im;
    }
    return p;
  };
  double c4[2]{}, cz[2]{}, fcz[2]{};
  for (const auto& e : set.epochs) {
    const int l = static_cast<int>(e.label);
    c4[l] += tone_power(e, idx("C4"), 9, 11);
    cz[l] += tone_power(e, idx("Cz"), 5.5, 6.5);
    fcz[l] += tone_power(e, idx("FCz"), 39.5, 40.5);
  }
  CHECK(c4[1] < 0.7 * c4[0]);
  CHECK(cz[1] > 1.5 * cz[0]);
  CHECK(fcz[1] > 2.0 * fcz[0]);
}

TEST_CASE("synthetic recording carries alternating stimulus markers") {
  SynthConfig cfg;
  const auto rec = synth_recording(cfg, 0, 30.0, 5.0);
  CHECK(rec.n_samples() == 15000);
  std::size_t stim = 0;
  for (const auto& m : rec.markers)
    if (m.kind == "Stimulus") {
      CHECK(m.position_samples % 2500 == 0);
      CHECK(m.description == (stim % 2 ? "S 70" : "S 30"));
      ++stim;
    }
  CHECK(stim == 5);
  const auto epochs = extract_epochs(rec);
  CHECK(epochs.epochs.size() == 5);
  for (std::size_t c = 0; c < rec.samples.rows(); ++c)
    for (std::size_t k = 0; k < 100; ++k)
      CHECK(static_cast<double>(static_cast<float>(rec.samples(c, k))) == rec.samples(c, k));
}
