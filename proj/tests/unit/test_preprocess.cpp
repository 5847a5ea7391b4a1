#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "oracles.hpp"
#include "painscope/error.hpp"
#include "painscope/filters.hpp"
#include "painscope/preprocess.hpp"
#include "painscope/resample.hpp"
#include "painscope/spectral.hpp"

using namespace painscope;

namespace {

constexpr double kFs = 500.0;

double energy(std::span<const double> x, std::size_t trim = 0) {
  double s = 0.0;
  for (std::size_t i = trim; i + trim < x.size(); ++i) s += x[i] * x[i];
  return s;
}

// Lag of the peak cross-correlation between x and y within ±max_lag.
int peak_lag(std::span<const double> x, std::span<const double> y, int max_lag) {
  int best_lag = 0;
  double best = -1e300;
  const auto n = static_cast<int>(x.size());
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    double s = 0.0;
    for (int i = std::max(0, -lag); i < std::min(n, n - lag); ++i) s += x[i] * y[i + lag];
    if (s > best) {
      best = s;
      best_lag = lag;
    }
  }
  return best_lag;
}

}  // namespace

TEST_CASE("high-pass removes DC") {
  const std::vector<double> x(8000, 5.0);
  const auto y = highpass_zero_phase(x, kFs, {});
  double worst = 0.0;
  for (std::size_t i = 1000; i < y.size() - 1000; ++i) worst = std::max(worst, std::abs(y[i]));
  CHECK(worst < 1e-3);
}

TEST_CASE("high-pass passband and stopband") {
  const FilterSpec spec;
  const auto h = design_highpass_fir(spec.highpass_cutoff_hz, kFs, spec.fir_taps);
  // Forward-backward response is |H|²; the designed kernel is the oracle.
  const double pass = std::pow(oracle::fir_magnitude(h, 10.0, kFs), 2);
  const double stop = std::pow(oracle::fir_magnitude(h, 0.1, kFs), 2);
  CHECK(pass == doctest::Approx(1.0).epsilon(0.02));
  CHECK(20 * std::log10(stop) <= -20.0);

  const auto y10 = highpass_zero_phase(oracle::sine(10.0, kFs, 20000), kFs, spec);
  CHECK(oracle::fit_sinusoid_amplitude(y10, 10.0, kFs, 3000) == doctest::Approx(1.0).epsilon(0.02));
  const auto y01 = highpass_zero_phase(oracle::sine(0.1, kFs, 40000), kFs, spec);
  CHECK(20 * std::log10(oracle::fit_sinusoid_amplitude(y01, 0.1, kFs, 5000)) <= -20.0);
}

TEST_CASE("high-pass rejects short input") {
  const std::vector<double> x(3003, 1.0);
  CHECK_THROWS_AS(highpass_zero_phase(x, kFs, {}), Error);
}

TEST_CASE("notch response") {
  const FilterSpec spec;
  const auto bq = design_notch(spec.notch_hz, spec.notch_q, kFs);
  const double at50 = oracle::biquad_magnitude(bq.b0, bq.b1, bq.b2, bq.a1, bq.a2, 50.0, kFs);
  const double at30 = oracle::biquad_magnitude(bq.b0, bq.b1, bq.b2, bq.a1, bq.a2, 30.0, kFs);
  CHECK(std::abs(sos_response({bq}, 30.0, kFs)) == doctest::Approx(at30).epsilon(1e-12));
  CHECK(20 * std::log10(at50 * at50 + 1e-300) <= -30.0);
  CHECK(std::abs(20 * std::log10(at30 * at30)) <= 1.0);

  const auto y50 = notch_zero_phase(oracle::sine(50.0, kFs, 10000), kFs, spec);
  CHECK(20 * std::log10(oracle::fit_sinusoid_amplitude(y50, 50.0, kFs, 1500)) <= -30.0);
  const auto y30 = notch_zero_phase(oracle::sine(30.0, kFs, 10000), kFs, spec);
  CHECK(std::abs(20 * std::log10(oracle::fit_sinusoid_amplitude(y30, 30.0, kFs, 1500))) <= 1.0);

  const std::vector<double> zero(5000, 0.0);
  const auto z = notch_zero_phase(zero, kFs, spec);
  CHECK(std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("filters are zero-phase") {
  // Band-limited input: noise smoothed by a short moving average.
  auto noise = oracle::gaussian_noise(12000, 3);
  std::vector<double> x(noise.size(), 0.0);
  for (std::size_t i = 8; i < x.size(); ++i)
    for (std::size_t k = 0; k < 8; ++k) x[i] += noise[i - k] / 8.0;
  const auto hp = highpass_zero_phase(x, kFs, {});
  CHECK(std::abs(peak_lag(x, hp, 20)) <= 1);
  const auto nt = notch_zero_phase(x, kFs, {});
  CHECK(std::abs(peak_lag(x, nt, 20)) <= 1);
}

TEST_CASE("notch is nearly idempotent") {
  // EEG-like input: integrated noise gives a 1/f² spectrum dominated by low frequencies.
  const auto w = oracle::gaussian_noise(10000, 9);
  std::vector<double> x(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) x[i] = acc = 0.98 * acc + w[i];
  const auto once = notch_zero_phase(x, kFs, {});
  const auto twice = notch_zero_phase(once, kFs, {});
  CHECK(std::abs(energy(twice) / energy(once) - 1.0) < 0.005);
}

TEST_CASE("filtering is linear") {
  const auto x = oracle::gaussian_noise(8000, 21);
  std::vector<double> scaled(x);
  for (auto& v : scaled) v *= 7.5;
  const auto a = highpass_zero_phase(x, kFs, {});
  const auto b = highpass_zero_phase(scaled, kFs, {});
  const auto c = notch_zero_phase(x, kFs, {});
  const auto d = notch_zero_phase(scaled, kFs, {});
  // Relative to the output scale; pointwise ratios blow up at zero crossings.
  double err_hp = 0.0, err_nt = 0.0, scale_hp = 0.0, scale_nt = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    err_hp = std::max(err_hp, std::abs(b[i] - 7.5 * a[i]));
    err_nt = std::max(err_nt, std::abs(d[i] - 7.5 * c[i]));
    scale_hp = std::max(scale_hp, std::abs(b[i]));
    scale_nt = std::max(scale_nt, std::abs(d[i]));
  }
  CHECK(err_hp / scale_hp < 1e-9);
  CHECK(err_nt / scale_nt < 1e-9);
}

TEST_CASE("resampling") {
  const auto noise = oracle::gaussian_noise(3000, 1);
  CHECK(resample_polyphase(noise, 500.0, 500.0) == noise);

  const auto x = oracle::sine(10.0, 1000.0, 8000);
  const auto y = resample_polyphase(x, 1000.0, 500.0);
  CHECK(y.size() == 4000);
  CHECK(oracle::fit_sinusoid_amplitude(y, 10.0, 500.0, 200) == doctest::Approx(1.0).epsilon(0.01));

  CHECK(PolyphaseResampler(128.0, 500.0).output_length(128) == 500);
  CHECK(resample_polyphase(noise, 128.0, 500.0).size() ==
        static_cast<std::size_t>(std::llround(3000.0 * 500.0 / 128.0)));

  const auto white = oracle::gaussian_noise(128 * 60, 4);
  const auto up = resample_polyphase(white, 128.0, 500.0);
  const auto spec = welch_psd(up, 500.0, {1.0, 0.5});
  double pass = 0.0, stop = 0.0;
  std::size_t np = 0, ns = 0;
  for (std::size_t i = 0; i < spec.freqs.size(); ++i) {
    if (spec.freqs[i] >= 5 && spec.freqs[i] <= 45) {
      pass += spec.psd[i];
      ++np;
    } else if (spec.freqs[i] > 64) {
      stop += spec.psd[i];
      ++ns;
    }
  }
  CHECK(10 * std::log10((stop / ns) / (pass / np)) <= -40.0);
}

TEST_CASE("bad channels") {
  Matrix m(9, 2000);
  const auto s = oracle::sine(10.0, kFs, 2000, 10.0);
  const auto noise = oracle::gaussian_noise(2000, 2, 100.0);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t i = 0; i < 2000; ++i) m(c, i) = s[i];
  for (std::size_t i = 0; i < 2000; ++i) m(8, i) = noise[i];
  auto q = detect_bad_channels(m);
  CHECK(q.bad_count() == 1);
  CHECK(q.bad_mask[8]);

  Matrix same(6, 1000);
  const auto base = oracle::gaussian_noise(1000, 3);
  for (std::size_t c = 0; c < 6; ++c)
    for (std::size_t i = 0; i < 1000; ++i) same(c, i) = base[i];
  CHECK(detect_bad_channels(same).bad_count() == 0);

  // Correlated EEG-like channels plus one flat channel.
  Matrix eeg(10, 2000);
  const auto common = oracle::gaussian_noise(2000, 4, 10.0);
  for (std::size_t c = 0; c < 10; ++c) {
    const auto own = oracle::gaussian_noise(2000, 100 + c, 3.0 + 0.2 * c);
    for (std::size_t i = 0; i < 2000; ++i) eeg(c, i) = c == 6 ? 0.0 : common[i] + own[i];
  }
  q = detect_bad_channels(eeg);
  CHECK(q.bad_mask[6]);
  CHECK(q.bad_count() == 1);

  CHECK_THROWS_AS(detect_bad_channels(Matrix(3, 100)), Error);
}

TEST_CASE("bad-channel mask is permutation-equivariant") {
  Matrix m(8, 1500);
  const auto common = oracle::gaussian_noise(1500, 8, 5.0);
  for (std::size_t c = 0; c < 8; ++c) {
    const auto own = oracle::gaussian_noise(1500, 50 + c, c == 2 ? 80.0 : 2.0);
    for (std::size_t i = 0; i < 1500; ++i) m(c, i) = common[i] + own[i];
  }
  const std::vector<std::size_t> perm{5, 2, 7, 0, 1, 6, 3, 4};
  Matrix p(8, 1500);
  for (std::size_t c = 0; c < 8; ++c)
    for (std::size_t i = 0; i < 1500; ++i) p(c, i) = m(perm[c], i);
  const auto a = detect_bad_channels(m);
  const auto b = detect_bad_channels(p);
  for (std::size_t c = 0; c < 8; ++c) CHECK(b.bad_mask[c] == a.bad_mask[perm[c]]);
  CHECK(a.bad_mask[2]);
}

namespace {

EpochSet epochs_with(std::size_t count, std::size_t channels, std::size_t n,
                     const std::function<double(std::size_t, std::size_t, std::size_t)>& value) {
  EpochSet set;
  for (std::size_t c = 0; c < channels; ++c) set.channel_names.push_back("E" + std::to_string(c));
  for (std::size_t e = 0; e < count; ++e) {
    Epoch ep;
    ep.subject_id = "s";
    ep.label = PainLabel::High;
    ep.fs_hz = kFs;
    ep.samples = Matrix(channels, n);
    ep.channel_mask.assign(channels, true);
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t i = 0; i < n; ++i) ep.samples(c, i) = value(e, c, i);
    set.epochs.push_back(std::move(ep));
  }
  return set;
}

}  // namespace

TEST_CASE("artifact rejection") {
  const auto s = oracle::sine(5.0, kFs, 500, 40.0);  // ptp 80 µV
  auto set = epochs_with(20, 3, 500, [&](std::size_t e, std::size_t c, std::size_t i) {
    double v = s[i];
    if (e % 10 == 3 && c == 1 && i == 250) v += 500.0;
    return v;
  });
  const auto r = reject_artifact_epochs(set, 150.0);
  CHECK(r.rejection_rate == 0.10);
  CHECK(r.kept.epochs.size() == 18);
  CHECK(r.rejected == 2);
  CHECK_THROWS_AS(reject_artifact_epochs(set, 1.0), Error);
}

TEST_CASE("SNR estimate") {
  const auto identical = epochs_with(5, 2, 500, [](std::size_t, std::size_t, std::size_t i) { return std::sin(0.1 * i); });
  CHECK(estimate_snr_db(identical) == kSnrCapDb);

  std::vector<double> noise_db;
  std::vector<double> mixed_db;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const auto base = oracle::sine(7.0, kFs, 1000, std::sqrt(2.0));  // power 1
    std::vector<oracle::Vec> noise;
    for (std::size_t e = 0; e < 20; ++e) noise.push_back(oracle::gaussian_noise(1000, 1000 * trial + e));
    const auto mixed = epochs_with(20, 1, 1000, [&](std::size_t e, std::size_t, std::size_t i) { return base[i] + noise[e][i]; });
    const auto pure = epochs_with(20, 1, 1000, [&](std::size_t e, std::size_t, std::size_t i) { return noise[e][i]; });
    mixed_db.push_back(estimate_snr_db(mixed));
    noise_db.push_back(estimate_snr_db(pure));
  }
  CHECK(std::abs(oracle::mean(mixed_db)) <= 1.0);
  CHECK(oracle::mean(noise_db) <= -10.0);

  const auto single = epochs_with(1, 2, 100, [](std::size_t, std::size_t, std::size_t) { return 1.0; });
  CHECK_THROWS_AS(estimate_snr_db(single), Error);
}
