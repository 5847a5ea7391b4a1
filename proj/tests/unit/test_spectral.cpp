#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "painscope/error.hpp"
#include "painscope/spectral.hpp"

using namespace painscope;

namespace {
constexpr double kFs = 500.0;
const WelchParams kWelch{1.0, 0.5};
const Band kDelta{"delta", 1, 4}, kTheta{"theta", 4, 8}, kAlpha{"alpha", 8, 13}, kBeta{"beta", 13, 30},
    kGamma{"gamma", 30, 90};
}  // namespace

TEST_CASE("Welch Parseval for a sine and for white noise") {
  const auto s = oracle::sine(10.0, kFs, 2000);
  const auto spec = welch_psd(s, kFs, kWelch);
  CHECK(spec.segments == 7);
  const auto peak = std::max_element(spec.psd.begin(), spec.psd.end()) - spec.psd.begin();
  CHECK(std::abs(spec.freqs[peak] - 10.0) <= spec.df());
  CHECK(oracle::integrate(spec.freqs, spec.psd) == doctest::Approx(0.5).epsilon(0.05));

  const auto w = oracle::gaussian_noise(20000, 7);
  const auto ws = welch_psd(w, kFs, kWelch);
  CHECK(oracle::integrate(ws.freqs, ws.psd) == doctest::Approx(oracle::population_sd(w) * oracle::population_sd(w)).epsilon(0.05));

  const std::vector<double> zero(2000, 0.0);
  const auto zs = welch_psd(zero, kFs, kWelch);
  CHECK(std::all_of(zs.psd.begin(), zs.psd.end(), [](double v) { return v == 0.0; }));
  CHECK_THROWS_AS(welch_psd(std::vector<double>(100, 1.0), kFs, kWelch), Error);
}

TEST_CASE("band power of a 10 Hz sine") {
  const auto spec = welch_psd(oracle::sine(10.0, kFs, 2000), kFs, kWelch);
  const double total = oracle::integrate(spec.freqs, spec.psd);
  CHECK(band_power(spec, kAlpha) >= 0.95 * total);
  CHECK(band_power(spec, kGamma) <= 0.01 * total);
}

TEST_CASE("band above Nyquist is clipped or rejected") {
  const auto spec = welch_psd(oracle::gaussian_noise(1280, 3), 128.0, {0.5, 0.5});
  bool clipped = false;
  const double g = band_power(spec, kGamma, &clipped);
  CHECK(clipped);
  CHECK(g > 0.0);
  CHECK_THROWS_AS(band_power(spec, Band{"x", 70, 90}), Error);
}

TEST_CASE("periodogram of a short gamma burst") {
  // 40 Hz burst inside 0–160 ms only.
  std::vector<double> x(500, 0.0);
  const auto burst = oracle::sine(40.0, kFs, 80);
  std::copy(burst.begin(), burst.end(), x.begin());
  const auto w1 = periodogram(std::span<const double>(x).subspan(0, 80), kFs, 1024);
  const auto w3 = periodogram(std::span<const double>(x).subspan(150, 350), kFs, 1024);
  CHECK(band_power(w1, kGamma) > 10.0 * band_power(w3, kGamma) + 1e-30);
}

TEST_CASE("peak frequency") {
  const auto spec = welch_psd(oracle::sine(10.0, kFs, 2000), kFs, kWelch);
  const auto p = peak_frequency(spec, kAlpha);
  CHECK(std::abs(p.peak_hz - 10.0) <= spec.df());
  CHECK_FALSE(p.flat);

  auto two = oracle::sine(9.0, kFs, 2000);
  const auto b = oracle::sine(12.0, kFs, 2000, std::sqrt(2.0));
  for (std::size_t i = 0; i < two.size(); ++i) two[i] += b[i];
  CHECK(peak_frequency(welch_psd(two, kFs, kWelch), kAlpha).peak_hz == doctest::Approx(12.0));

  Spectrum flat;
  for (int i = 0; i <= 250; ++i) {
    flat.freqs.push_back(i);
    flat.psd.push_back(1.0);
  }
  const auto f = peak_frequency(flat, kBeta);
  CHECK(f.flat);
  CHECK(f.peak_hz == doctest::Approx(21.5));
  CHECK(f.bandwidth_hz == doctest::Approx(17.0));
}

TEST_CASE("spectral entropy") {
  CHECK(spectral_entropy(std::vector<double>(64, 2.0)) == doctest::Approx(1.0));
  std::vector<double> point(64, 0.0);
  point[5] = 3.0;
  CHECK(spectral_entropy(point) == doctest::Approx(0.0));
  bool all_zero = false;
  CHECK(spectral_entropy(std::vector<double>(8, 0.0), &all_zero) == 0.0);
  CHECK(all_zero);
  const auto spec = welch_psd(oracle::gaussian_noise(2000, 5), kFs, kWelch);
  CHECK(spectral_entropy(spec.psd) >= 0.9);
}

TEST_CASE("coherence") {
  const auto x = oracle::gaussian_noise(2000, 1);
  const auto cs = coherence_spectrum(x, x, kFs, {0.5, 0.5});
  for (double v : cs.psd) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));

  // Band-limited noise, delayed copy.
  const auto raw = oracle::gaussian_noise(4010, 2);
  std::vector<double> bl(4010, 0.0);
  for (std::size_t i = 4; i < bl.size(); ++i)
    for (std::size_t k = 0; k < 5; ++k) bl[i] += raw[i - k];
  const std::vector<double> a(bl.begin() + 10, bl.end());
  const std::vector<double> d(bl.begin(), bl.end() - 10);
  CHECK(coherence(a, d, kFs, {1.0, 0.5}, 1.0, 40.0) >= 0.95);

  const auto y = oracle::gaussian_noise(2125, 8);
  const auto z = oracle::gaussian_noise(2125, 9);
  const auto ind = coherence_spectrum(y, z, kFs, {0.5, 0.5});
  CHECK(ind.segments == 16);
  CHECK(coherence(y, z, kFs, {0.5, 0.5}, 1.0, 40.0) <= 0.25);

  CHECK_THROWS_AS(coherence(std::span(x).first(600), std::span(x).first(600), kFs, {0.5, 0.5}, 1, 40), Error);
}
