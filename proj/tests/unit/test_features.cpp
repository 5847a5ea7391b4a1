#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "painscope/error.hpp"
#include "painscope/feature_config.hpp"
#include "painscope/features.hpp"

using namespace painscope;

namespace {

Epoch noise_epoch(std::uint64_t seed, double gain = 1.0) {
  const auto& names = default_channels();
  Epoch e;
  e.subject_id = "s01";
  e.fs_hz = 500.0;
  e.samples = Matrix(names.size(), 2000);
  e.channel_mask.assign(names.size(), true);
  const auto common = oracle::gaussian_noise(2000, seed * 977, 5.0);
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto own = oracle::gaussian_noise(2000, seed * 977 + c + 1, 3.0);
    const auto alpha = oracle::sine(10.0, 500.0, 2000, 4.0 + c, 0.1 * c);
    for (std::size_t i = 0; i < 2000; ++i) e.samples(c, i) = gain * (common[i] + own[i] + alpha[i]);
  }
  return e;
}

}  // namespace

TEST_CASE("default manifest census") {
  const auto m = build_manifest(default_channels());
  CHECK(m.entries.size() == kFeatureSlots);
  CHECK(m.native_slots == 535);
  std::size_t per_channel = 0, coherence = 0, peak = 0, wavelet = 0, pad = 0;
  std::set<std::tuple<std::string, std::string, std::string>> unique;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    CHECK(e.slot == i);
    unique.insert({e.feature, e.channel, e.band_or_window + (e.feature == "pad" ? std::to_string(i) : "")});
    if (e.feature == "pad") ++pad;
    else if (e.feature == "coherence") ++coherence;
    else if (e.feature == "peak_frequency" || e.feature == "bandwidth_3db") ++peak;
    else if (e.feature == "dwt_mean_abs") ++wavelet;
    else ++per_channel;
  }
  CHECK(per_channel == 518);
  CHECK(coherence == 2);
  CHECK(peak == 10);
  CHECK(wavelet == 5);
  CHECK(pad == 2);
  CHECK(unique.size() == kFeatureSlots);
  CHECK(build_manifest(default_channels()).content_hash == m.content_hash);
  CHECK(m.content_hash.size() == 64);
}

TEST_CASE("manifests for other montages canonicalize to 537") {
  std::vector<std::string> many;
  for (int i = 0; i < 20; ++i) many.push_back("E" + std::to_string(i));
  const auto big = build_manifest(many);
  CHECK(big.entries.size() == kFeatureSlots);
  CHECK(big.truncated());
  const auto small = build_manifest({"C3", "C4", "Cz", "Pz"});
  CHECK(small.entries.size() == kFeatureSlots);
  CHECK(small.padded());
  CHECK(small.content_hash != big.content_hash);
}

TEST_CASE("band ratios") {
  // Ratios depend only on band powers, so check them via a vector whose channel is a pure tone.
  const auto m = build_manifest(default_channels());
  auto e = noise_epoch(1);
  const auto fv = extract_features(e, default_channels(), FeatureConfig{}, m);
  const auto slot = [&](const char* f, const char* bw) { return fv.values[m.slot_of(f, "C3", bw)]; };
  const double alpha = slot("band_power", "alpha[8-13Hz]");
  const double gamma = slot("band_power", "gamma[30-90Hz]");
  CHECK(slot("band_ratio", "gamma/alpha") == doctest::Approx(gamma / alpha).epsilon(1e-12));
  const double theta = slot("band_power", "theta[4-8Hz]");
  const double beta = slot("band_power", "beta[13-30Hz]");
  CHECK(slot("band_ratio", "(theta+alpha)/(beta+gamma)") == doctest::Approx((theta + alpha) / (beta + gamma)).epsilon(1e-12));
}

TEST_CASE("zero channel hits the ratio floor and stays finite") {
  const auto m = build_manifest(default_channels());
  auto e = noise_epoch(2);
  for (std::size_t i = 0; i < 2000; ++i) e.samples(3, i) = 0.0;
  const auto fv = extract_features(e, default_channels(), FeatureConfig{}, m);
  const auto s = m.slot_of("band_ratio", "FC3", "gamma/alpha");
  CHECK(std::isfinite(fv.values[s]));
  CHECK(fv.flagged[s]);
}

TEST_CASE("extraction is deterministic and policy-independent") {
  const auto m = build_manifest(default_channels());
  const auto e = noise_epoch(3);
  const auto a = extract_features(e, default_channels(), FeatureConfig{}, m, ExecPolicy::Parallel);
  const auto b = extract_features(e, default_channels(), FeatureConfig{}, m, ExecPolicy::Serial);
  CHECK(a.values == b.values);
  CHECK(a.pending_count() == 0);
  CHECK(a.values[535] == 0.0);
  CHECK(a.values[536] == 0.0);
  CHECK(a.manifest_hash == m.content_hash);
}

TEST_CASE("masked channels leave their slots pending") {
  const auto m = build_manifest(default_channels());
  auto e = noise_epoch(4);
  e.channel_mask[7] = false;  // C3
  const auto fv = extract_features(e, default_channels(), FeatureConfig{}, m);
  CHECK(std::isnan(fv.values[m.slot_of("hjorth_activity", "C3", "full")]));
  CHECK(std::isnan(fv.values[m.slot_of("coherence", "C3-C4", "1-40Hz")]));
  CHECK(fv.pending_count() == kPerChannelSlots + 1);

  std::fill(e.channel_mask.begin(), e.channel_mask.end(), false);
  const auto none = extract_features(e, default_channels(), FeatureConfig{}, m);
  CHECK(none.pending_count() == 535);
}

TEST_CASE("scale-invariant slots survive a global gain") {
  const auto m = build_manifest(default_channels());
  const auto a = extract_features(noise_epoch(5, 1.0), default_channels(), FeatureConfig{}, m);
  const auto b = extract_features(noise_epoch(5, 37.0), default_channels(), FeatureConfig{}, m);
  std::size_t checked = 0;
  for (const auto& e : m.entries) {
    const bool invariant = e.feature == "band_ratio" || e.feature == "spectral_entropy" || e.feature == "sample_entropy" ||
                           e.feature == "higuchi_fd" || e.feature == "coherence" || e.feature == "hjorth_mobility" ||
                           e.feature == "hjorth_complexity";
    if (!invariant) continue;
    CHECK(std::abs(b.values[e.slot] - a.values[e.slot]) <= 1e-6 * std::abs(a.values[e.slot]) + 1e-12);
    ++checked;
  }
  CHECK(checked == 14 * 10 + 2);
}

TEST_CASE("standardization") {
  Matrix rows(2, 3);
  rows(0, 0) = 1;
  rows(1, 0) = 3;
  rows(0, 1) = 4;
  rows(1, 1) = 4;
  rows(0, 2) = std::nan("");
  rows(1, 2) = 6;
  const auto st = fit_standardization(rows);
  CHECK(st.mean[0] == 2.0);
  CHECK(st.sd[0] == 1.0);
  CHECK(st.constant[1]);
  const std::vector<double> probe{3.0, 100.0, std::nan("")};
  const auto z = apply_standardization(st, probe);
  CHECK(z[0] == 1.0);
  CHECK(z[1] == 0.0);
  CHECK(z[2] == 0.0);

  Matrix big(50, 4);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 4; ++j) big(i, j) = j == 3 ? 2.0 : std::sin(1.0 + i * (j + 1));
  const auto s2 = fit_standardization(big);
  const auto copy = s2;
  const auto zb = apply_standardization(s2, big);
  CHECK(s2 == copy);
  CHECK(fit_standardization(big) == s2);
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < 50; ++i) col.push_back(zb(i, j));
    CHECK(std::abs(oracle::mean(col)) <= 1e-9);
    const double sd = oracle::population_sd(col);
    CHECK((sd == 0.0 || std::abs(sd - 1.0) <= 1e-9));
  }
}

TEST_CASE("feature file round trip") {
  EpochSet set;
  set.channel_names = default_channels();
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto e = noise_epoch(10 + s);
    e.label = s % 2 ? PainLabel::High : PainLabel::Low;
    set.epochs.push_back(e);
  }
  const auto m = build_manifest(default_channels());
  const auto fm = featurize(set, FeatureConfig{}, m);
  CHECK(fm.rows() == 3);
  const auto bytes = encode_feature_matrix(fm);
  const auto back = decode_feature_matrix(bytes);
  CHECK(back.values == fm.values);
  CHECK(back.manifest_hash == m.content_hash);
  CHECK(back.labels == fm.labels);
  auto bad = bytes;
  bad[bad.size() / 2] ^= 1;
  CHECK_THROWS_AS(decode_feature_matrix(bad), Error);
}

TEST_CASE("feature config files round-trip and reject unknown versions") {
  FeatureConfig cfg = FeatureConfig::realtime_default();
  cfg.higuchi_kmax = 8;
  cfg.bands[4].hi_hz = 80.0;
  const auto back = parse_feature_config(feature_config_json(cfg, "realtime"));
  CHECK(back.higuchi_kmax == 8);
  CHECK(back.bands[4].hi_hz == 80.0);
  CHECK(back.welch.segment_seconds == 0.5);
  CHECK(build_manifest(default_channels(), back).content_hash == build_manifest(default_channels(), cfg).content_hash);

  const auto partial = parse_feature_config(R"({"format":"painscope-feature-config/1","sampen_m":3})");
  CHECK(partial.sampen_m == 3);
  CHECK(partial.welch.segment_seconds == 1.0);
  CHECK_THROWS_AS(parse_feature_config(R"({"format":"painscope-feature-config/9"})"), Error);
  CHECK_THROWS_AS(parse_feature_config(R"({"format":"painscope-feature-config/1","bands_hz":{"mu":[8,12]}})"), Error);
}
