#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "painscope/descriptors.hpp"

using namespace painscope;

TEST_CASE("time statistics") {
  const auto s = oracle::sine(10.0, 500.0, 500, 1.0, 0.3);
  const auto t = time_stats(s, 500.0);
  CHECK(t.zero_crossing_rate == doctest::Approx(20.0));
  CHECK(t.peak_to_peak == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(std::abs(t.mean) < 1e-12);

  const auto n = oracle::gaussian_noise(100000, 42);
  const auto tn = time_stats(n, 500.0);
  CHECK(std::abs(tn.skewness) < 0.05);
  CHECK(std::abs(tn.kurtosis - 3.0) < 0.1);

  const std::vector<double> c(100, 7.0);
  const auto tc = time_stats(c, 500.0);
  CHECK(tc.mean == 7.0);
  CHECK(tc.sd == 0.0);
  CHECK(tc.zero_variance);
  CHECK(tc.skewness == 0.0);
  CHECK(tc.kurtosis == 0.0);
}

TEST_CASE("Hjorth parameters") {
  const auto s = oracle::sine(10.0, 500.0, 5000);
  const auto h = hjorth(s);
  CHECK(h.activity == doctest::Approx(0.5).epsilon(0.01));
  CHECK(h.mobility == doctest::Approx(2.0 * std::sin(std::numbers::pi * 10.0 / 500.0)).epsilon(0.01));
  CHECK(h.complexity == doctest::Approx(1.0).epsilon(0.01));

  const auto n = oracle::gaussian_noise(5000, 4);
  CHECK(hjorth(n).complexity > 1.0);

  auto scaled = n;
  for (auto& v : scaled) v *= 3.7;
  const auto a = hjorth(n);
  const auto b = hjorth(scaled);
  CHECK(b.activity == doctest::Approx(a.activity * 3.7 * 3.7).epsilon(1e-12));
  CHECK(std::abs(b.mobility / a.mobility - 1.0) < 1e-9);
  CHECK(std::abs(b.complexity / a.complexity - 1.0) < 1e-9);
  CHECK(hjorth(std::vector<double>(10, 1.0)).zero_variance);
}

TEST_CASE("sample entropy matches the naive oracle") {
  CHECK(sample_entropy(std::vector<double>(200, 3.0)).value == 0.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 200 + 7 * seed;
    auto x = oracle::gaussian_noise(n, seed);
    if (seed % 3 == 1)
      for (std::size_t i = 0; i < n; ++i) x[i] = std::round(4 * x[i]) / 4;  // ties
    const double r = 0.2 * oracle::population_sd(x);
    const double fast = sample_entropy(x, 2, 0.2, seed % 2 ? ExecPolicy::Parallel : ExecPolicy::Serial).value;
    const double slow = oracle::sample_entropy(x, 2, r);
    REQUIRE(std::isfinite(slow));
    CHECK(std::abs(fast - slow) <= 1e-12);
  }
  const auto sine = oracle::sine(1.0, 500.0, 2000);
  const auto noise = oracle::gaussian_noise(2000, 77);
  CHECK(sample_entropy(sine).value < sample_entropy(noise).value);
}

TEST_CASE("Higuchi fractal dimension") {
  std::vector<double> line(500);
  for (std::size_t i = 0; i < line.size(); ++i) line[i] = static_cast<double>(i);
  CHECK(std::abs(higuchi_fd(line, 10).value - 1.0) <= 0.05);

  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) sum += higuchi_fd(oracle::gaussian_noise(2000, seed), 10).value;
  CHECK(std::abs(sum / 5 - 2.0) <= 0.15);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto x = oracle::gaussian_noise(100 + 13 * seed, 500 + seed);
    CHECK(std::abs(higuchi_fd(x, 10).value - oracle::higuchi_fd(x, 10)) <= 1e-12);
  }
  auto x = oracle::gaussian_noise(1000, 3);
  const double base = higuchi_fd(x, 10).value;
  for (auto& v : x) v *= 250.0;
  CHECK(std::abs(higuchi_fd(x, 10).value / base - 1.0) <= 1e-9);
}

TEST_CASE("db4 wavelet") {
  const auto& h = db4_lowpass();
  double sum = 0.0, sq = 0.0;
  for (double v : h) {
    sum += v;
    sq += v * v;
  }
  CHECK(sum == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(sq == doctest::Approx(1.0).epsilon(1e-15));

  const auto zero = dwt_energies(std::vector<double>(256, 0.0));
  CHECK(zero == std::vector<double>(5, 0.0));

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto x = oracle::gaussian_noise(128 + 16 * (seed % 9) + seed % 5, 900 + seed);
    const auto dec = dwt_db4(x, 4);
    double energy_in = 0.0, energy_out = 0.0;
    for (double v : x) energy_in += v * v;
    for (const auto& d : dec.details)
      for (double v : d) energy_out += v * v;
    for (double v : dec.approximation) energy_out += v * v;
    CHECK(std::abs(energy_out / energy_in - 1.0) <= 1e-9);

    const auto ref = oracle::db4_pyramid(x, 4, h);
    const auto e = dwt_energies(x);
    for (int l = 0; l < 4; ++l) {
      double m = 0.0;
      for (double v : ref.details[l]) m += std::abs(v);
      CHECK(std::abs(e[l] - m / ref.details[l].size()) <= 1e-12);
    }
    double m = 0.0;
    for (double v : ref.approximation) m += std::abs(v);
    CHECK(std::abs(e[4] - m / ref.approximation.size()) <= 1e-12);
  }

  std::vector<double> impulse(64, 0.0);
  impulse[0] = 1.0;
  // 64 samples support three levels under the 2^levels × 8 length rule.
  const auto dec = dwt_db4(impulse, 3);
  const auto ref = oracle::db4_pyramid(impulse, 3, h);
  for (int l = 0; l < 3; ++l)
    for (std::size_t k = 0; k < ref.details[l].size(); ++k) CHECK(std::abs(dec.details[l][k] - ref.details[l][k]) <= 1e-12);
  for (std::size_t k = 0; k < ref.approximation.size(); ++k)
    CHECK(std::abs(dec.approximation[k] - ref.approximation[k]) <= 1e-12);
}
