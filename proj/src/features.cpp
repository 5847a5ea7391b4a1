#include "painscope/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "painscope/binary_io.hpp"
#include "painscope/descriptors.hpp"
#include "painscope/digest.hpp"
#include "painscope/error.hpp"

namespace painscope {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRatioFloor = 1e-12;

struct RatioDef {
  const char* name;
  std::vector<std::size_t> numerator;    // band indices
  std::vector<std::size_t> denominator;
};

// Band indices: 0 delta, 1 theta, 2 alpha, 3 beta, 4 gamma.
const std::vector<RatioDef>& ratio_defs() {
  static const std::vector<RatioDef> defs{
      {"gamma/alpha", {4}, {2}},
      {"delta/theta", {0}, {1}},
      {"theta/alpha", {1}, {2}},
      {"beta/alpha", {3}, {2}},
      {"(theta+alpha)/(beta+gamma)", {1, 2}, {3, 4}},
  };
  return defs;
}

constexpr std::array<const char*, 6> kTimeStatNames{"mean", "sd", "skewness", "kurtosis", "zero_crossing_rate",
                                                    "peak_to_peak"};
constexpr std::array<const char*, 3> kHjorthNames{"hjorth_activity", "hjorth_mobility", "hjorth_complexity"};

std::string band_label(const Band& b) {
  std::ostringstream s;
  s << b.name << "[" << b.lo_hz << "-" << b.hi_hz << "Hz]";
  return s.str();
}

std::string window_label(const SubWindow& w) {
  std::ostringstream s;
  s << w.start_ms << "-" << w.end_ms << "ms";
  return s.str();
}

struct ChannelResult {
  std::array<double, kPerChannelSlots> values{};
  std::array<bool, kPerChannelSlots> flags{};
  Spectrum psd;
  std::vector<double> wavelet;
};

ChannelResult compute_channel(std::span<const double> x, double fs, const FeatureConfig& cfg) {
  ChannelResult r;
  std::size_t k = 0;
  const auto put = [&](double v, bool flag = false) {
    r.values[k] = v;
    r.flags[k] = flag;
    ++k;
  };

  r.psd = welch_psd(x, fs, cfg.welch);
  std::array<double, 5> powers{};
  for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
    bool clipped = false;
    powers[b] = band_power(r.psd, cfg.bands[b], &clipped);
    put(powers[b], clipped);
  }

  // Sub-window spectra are computed once per window, then integrated per band.
  std::vector<std::optional<Spectrum>> sub(cfg.subwindows.size());
  for (std::size_t w = 0; w < cfg.subwindows.size(); ++w) {
    const auto lo = static_cast<std::size_t>(std::llround(cfg.subwindows[w].start_ms * fs / 1000.0));
    const auto hi = std::min(x.size(), static_cast<std::size_t>(std::llround(cfg.subwindows[w].end_ms * fs / 1000.0)));
    if (hi > lo + 1) sub[w] = periodogram(x.subspan(lo, hi - lo), fs, cfg.subwindow_nfft);
  }
  for (const auto& band : cfg.bands) {
    for (std::size_t w = 0; w < cfg.subwindows.size(); ++w) {
      if (!sub[w]) {
        put(kNaN, true);
        continue;
      }
      bool clipped = false;
      const double p = band_power(*sub[w], band, &clipped);
      const double duration_s = (cfg.subwindows[w].end_ms - cfg.subwindows[w].start_ms) / 1000.0;
      const bool low_confidence = 1.0 / duration_s > band.hi_hz - band.lo_hz;
      put(p, clipped || low_confidence);
    }
  }

  for (const auto& def : ratio_defs()) {
    double num = 0.0, den = 0.0;
    for (auto i : def.numerator) num += powers[i];
    for (auto i : def.denominator) den += powers[i];
    const bool floored = den < kRatioFloor;
    put(num / std::max(den, kRatioFloor), floored);
  }

  const auto ts = time_stats(x, fs);
  put(ts.mean);
  put(ts.sd);
  put(ts.skewness, ts.zero_variance);
  put(ts.kurtosis, ts.zero_variance);
  put(ts.zero_crossing_rate);
  put(ts.peak_to_peak);

  const auto hj = hjorth(x);
  put(hj.activity);
  put(hj.mobility, hj.zero_variance);
  put(hj.complexity, hj.zero_variance);

  bool psd_zero = false;
  put(spectral_entropy(r.psd.psd, &psd_zero), psd_zero);
  const auto se = sample_entropy(x, cfg.sampen_m, cfg.sampen_r_factor, ExecPolicy::Serial);
  put(se.value, se.sentinel);
  const auto fd = higuchi_fd(x, cfg.higuchi_kmax);
  put(fd.value, fd.degenerate);

  r.wavelet = dwt_energies(x, cfg.wavelet_levels);
  return r;
}

}  // namespace

FeatureConfig FeatureConfig::realtime_default() {
  FeatureConfig cfg;
  cfg.welch = {0.5, 0.5};
  cfg.coherence_welch = {0.25, 0.5};
  return cfg;
}

void FeatureConfig::validate() const {
  if (bands.size() != 5) throw Error(ErrorKind::InvalidArgument, "exactly five canonical bands expected");
  for (std::size_t i = 0; i < subwindows.size(); ++i) {
    if (!(subwindows[i].end_ms > subwindows[i].start_ms))
      throw Error(ErrorKind::InvalidArgument, "sub-window must have positive length");
    if (i > 0 && subwindows[i].start_ms < subwindows[i - 1].end_ms)
      throw Error(ErrorKind::InvalidArgument, "sub-windows must be ordered and non-overlapping");
  }
  if (subwindows.size() != 3) throw Error(ErrorKind::InvalidArgument, "three sub-windows expected");
  if (!(sampen_r_factor > 0.0)) throw Error(ErrorKind::InvalidArgument, "sample entropy r factor must be positive");
  if (higuchi_kmax < 2) throw Error(ErrorKind::InvalidArgument, "Higuchi kmax must be >= 2");
  if (wavelet_levels != 4) throw Error(ErrorKind::InvalidArgument, "four wavelet levels expected");
}

const std::vector<std::string>& default_channels() {
  static const std::vector<std::string> channels{"F3", "Fz", "F4", "FC3", "FCz", "FC4", "T7",
                                                 "C3", "Cz", "C4", "T8", "P3",  "Pz",  "P4"};
  return channels;
}

std::size_t FeatureManifest::slot_of(std::string_view feature, std::string_view channel,
                                     std::string_view band_or_window) const {
  for (const auto& e : entries)
    if (e.feature == feature && e.channel == channel && e.band_or_window == band_or_window) return e.slot;
  throw Error(ErrorKind::InvalidArgument,
              "no manifest slot " + std::string(feature) + "/" + std::string(channel) + "/" + std::string(band_or_window));
}

std::string FeatureManifest::to_text() const {
  std::ostringstream s;
  s << "# feature manifest\n"
    << "# version\t" << version << "\n"
    << "# content_hash\t" << content_hash << "\n"
    << "# native_slots\t" << native_slots << "\n"
    << "# channels\t";
  for (std::size_t i = 0; i < channels.size(); ++i) s << (i ? "," : "") << channels[i];
  s << "\nslot\tfeature\tchannel\tband_or_window\n";
  for (const auto& e : entries) s << e.slot << "\t" << e.feature << "\t" << e.channel << "\t" << e.band_or_window << "\n";
  return s.str();
}

FeatureManifest build_manifest(const std::vector<std::string>& channels, const FeatureConfig& cfg) {
  cfg.validate();
  FeatureManifest m;
  m.channels = channels;
  std::vector<ManifestEntry> native;
  const auto add = [&](std::string feature, std::string channel, std::string bw) {
    native.push_back({native.size(), std::move(feature), std::move(channel), std::move(bw)});
  };
  for (const auto& ch : channels) {
    for (const auto& b : cfg.bands) add("band_power", ch, band_label(b));
    for (const auto& b : cfg.bands)
      for (const auto& w : cfg.subwindows) add("subwindow_band_power", ch, band_label(b) + "@" + window_label(w));
    for (const auto& r : ratio_defs()) add("band_ratio", ch, r.name);
    for (const auto* name : kTimeStatNames) add(name, ch, "full");
    for (const auto* name : kHjorthNames) add(name, ch, "full");
    add("spectral_entropy", ch, "full");
    add("sample_entropy", ch, "m=" + std::to_string(cfg.sampen_m));
    add("higuchi_fd", ch, "kmax=" + std::to_string(cfg.higuchi_kmax));
  }
  for (const auto& [a, b] : cfg.coherence_pairs) {
    std::ostringstream bw;
    bw << cfg.coherence_lo_hz << "-" << cfg.coherence_hi_hz << "Hz";
    add("coherence", a + "-" + b, bw.str());
  }
  for (const auto& b : cfg.bands) {
    add("peak_frequency", "global", band_label(b));
    add("bandwidth_3db", "global", band_label(b));
  }
  for (int level = 1; level <= cfg.wavelet_levels; ++level)
    add("dwt_mean_abs", "global", "db4/d" + std::to_string(level));
  add("dwt_mean_abs", "global", "db4/a" + std::to_string(cfg.wavelet_levels));

  m.native_slots = native.size();
  native.resize(std::min(native.size(), kFeatureSlots));
  while (native.size() < kFeatureSlots) native.push_back({native.size(), "pad", "", ""});
  m.entries = std::move(native);

  std::ostringstream canon;
  canon << m.version << "\n" << m.native_slots << "\n";
  for (const auto& e : m.entries) canon << e.slot << "\t" << e.feature << "\t" << e.channel << "\t" << e.band_or_window << "\n";
  m.content_hash = to_hex(sha256(canon.str()));
  return m;
}

std::size_t FeatureVector::pending_count() const {
  return static_cast<std::size_t>(std::count(imputed_mask.begin(), imputed_mask.end(), true));
}

FeatureVector extract_features(const WindowView& window, const FeatureConfig& cfg, const FeatureManifest& manifest,
                               ExecPolicy policy) {
  const std::size_t n_manifest_ch = manifest.channels.size();
  std::vector<double> native(manifest.native_slots, kNaN);
  std::vector<bool> native_flag(manifest.native_slots, false);

  // Manifest channel → row in the window, or -1 when absent or unusable.
  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < window.channel_names.size(); ++i) row_of.emplace(window.channel_names[i], i);
  std::vector<std::ptrdiff_t> rows(n_manifest_ch, -1);
  for (std::size_t c = 0; c < n_manifest_ch; ++c) {
    const auto it = row_of.find(manifest.channels[c]);
    if (it == row_of.end()) continue;
    const bool usable = window.usable.empty() || window.usable[it->second];
    if (usable) rows[c] = static_cast<std::ptrdiff_t>(it->second);
  }

  std::vector<std::optional<ChannelResult>> results(n_manifest_ch);
  const auto run = [&](std::size_t c) {
    if (rows[c] < 0) return;
    results[c] = compute_channel(window.samples.row(static_cast<std::size_t>(rows[c])), window.fs_hz, cfg);
  };
  for_each_index(n_manifest_ch, policy, run);

  const auto set_slot = [&](std::size_t slot, double v, bool flag) {
    if (slot >= native.size()) return;
    native[slot] = v;
    native_flag[slot] = flag;
  };

  std::vector<const ChannelResult*> usable;
  for (std::size_t c = 0; c < n_manifest_ch; ++c) {
    if (!results[c]) continue;
    usable.push_back(&*results[c]);
    for (std::size_t k = 0; k < kPerChannelSlots; ++k)
      set_slot(c * kPerChannelSlots + k, results[c]->values[k], results[c]->flags[k]);
  }

  std::size_t slot = n_manifest_ch * kPerChannelSlots;
  std::map<std::string, std::size_t> manifest_index;
  for (std::size_t c = 0; c < n_manifest_ch; ++c) manifest_index.emplace(manifest.channels[c], c);
  for (const auto& [a, b] : cfg.coherence_pairs) {
    const auto ia = manifest_index.find(a);
    const auto ib = manifest_index.find(b);
    if (ia != manifest_index.end() && ib != manifest_index.end() && rows[ia->second] >= 0 && rows[ib->second] >= 0) {
      const auto xa = window.samples.row(static_cast<std::size_t>(rows[ia->second]));
      const auto xb = window.samples.row(static_cast<std::size_t>(rows[ib->second]));
      set_slot(slot, coherence(xa, xb, window.fs_hz, cfg.coherence_welch, cfg.coherence_lo_hz, cfg.coherence_hi_hz),
               false);
    }
    ++slot;
  }

  if (!usable.empty()) {
    Spectrum mean_psd = usable.front()->psd;
    for (std::size_t i = 1; i < usable.size(); ++i)
      for (std::size_t b = 0; b < mean_psd.psd.size(); ++b) mean_psd.psd[b] += usable[i]->psd.psd[b];
    for (auto& v : mean_psd.psd) v /= static_cast<double>(usable.size());
    for (std::size_t b = 0; b < cfg.bands.size(); ++b) {
      const auto peak = peak_frequency(mean_psd, cfg.bands[b]);
      set_slot(slot + 2 * b, peak.peak_hz, peak.flat);
      set_slot(slot + 2 * b + 1, peak.bandwidth_hz, peak.flat);
    }
    std::vector<double> wavelet(usable.front()->wavelet.size(), 0.0);
    for (const auto* r : usable)
      for (std::size_t i = 0; i < wavelet.size(); ++i) wavelet[i] += r->wavelet[i];
    for (std::size_t i = 0; i < wavelet.size(); ++i)
      set_slot(slot + 2 * cfg.bands.size() + i, wavelet[i] / static_cast<double>(usable.size()), false);
  }

  FeatureVector fv;
  fv.manifest_hash = manifest.content_hash;
  fv.values.assign(kFeatureSlots, 0.0);
  fv.imputed_mask.assign(kFeatureSlots, false);
  fv.flagged.assign(kFeatureSlots, false);
  fv.pad_truncate_applied = manifest.native_slots != kFeatureSlots;
  const std::size_t copy = std::min(native.size(), kFeatureSlots);
  for (std::size_t i = 0; i < copy; ++i) {
    fv.values[i] = native[i];
    fv.imputed_mask[i] = std::isnan(native[i]);
    fv.flagged[i] = native_flag[i];
  }
  return fv;
}

FeatureVector extract_features(const Epoch& epoch, std::span<const std::string> channel_names,
                               const FeatureConfig& cfg, const FeatureManifest& manifest, ExecPolicy policy) {
  // std::vector<bool> has no contiguous storage; widen to a bool array.
  std::unique_ptr<bool[]> usable(new bool[epoch.channel_mask.size()]);
  for (std::size_t i = 0; i < epoch.channel_mask.size(); ++i) usable[i] = epoch.channel_mask[i];
  const WindowView view{epoch.samples, channel_names, std::span<const bool>(usable.get(), epoch.channel_mask.size()),
                        epoch.fs_hz};
  auto fv = extract_features(view, cfg, manifest, policy);
  fv.label = epoch.label;
  fv.subject_id = epoch.subject_id;
  return fv;
}

FeatureMatrix featurize(const EpochSet& set, const FeatureConfig& cfg, const FeatureManifest& manifest,
                        ExecPolicy policy) {
  FeatureMatrix fm;
  fm.manifest_hash = manifest.content_hash;
  fm.manifest_version = manifest.version;
  fm.values = Matrix(set.epochs.size(), kFeatureSlots);
  fm.subjects.resize(set.epochs.size());
  fm.labels.resize(set.epochs.size());
  const auto run = [&](std::size_t i) {
    const auto fv = extract_features(set.epochs[i], set.channel_names, cfg, manifest, ExecPolicy::Serial);
    std::copy(fv.values.begin(), fv.values.end(), fm.values.row(i).begin());
    fm.subjects[i] = set.epochs[i].subject_id;
    fm.labels[i] = set.epochs[i].label;
  };
  for_each_index(set.epochs.size(), policy, run);
  return fm;
}

std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& fm) {
  ByteWriter w;
  w.put_raw(kFeatureFileMagic);
  w.put(kFeatureFileVersion);
  w.put_string(fm.manifest_hash);
  w.put_string(fm.manifest_version);
  w.put(static_cast<std::uint64_t>(fm.values.rows()));
  w.put(static_cast<std::uint64_t>(fm.values.cols()));
  for (std::size_t r = 0; r < fm.values.rows(); ++r) {
    w.put_string(fm.subjects[r]);
    w.put(static_cast<std::uint8_t>(fm.labels[r]));
    for (double v : fm.values.row(r)) w.put(v);
  }
  const auto digest = sha256(w.bytes());
  w.put_bytes(digest);
  return w.take();
}

FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFeatureFileMagic.size() + 32) throw Error(ErrorKind::CorruptPayload, "feature file too short");
  const auto body = bytes.first(bytes.size() - 32);
  const auto digest = sha256(body);
  if (!std::equal(digest.begin(), digest.end(), bytes.end() - 32))
    throw Error(ErrorKind::CorruptPayload, "feature file digest mismatch");
  ByteReader r(body);
  if (r.get_raw(kFeatureFileMagic.size()) != kFeatureFileMagic) throw Error(ErrorKind::CorruptPayload, "bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kFeatureFileVersion) throw Error(ErrorKind::VersionMismatch, "feature file version " + std::to_string(version));
  FeatureMatrix fm;
  fm.manifest_hash = r.get_string();
  fm.manifest_version = r.get_string();
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  if (cols != 0 && rows > r.remaining() / (cols * 8)) throw Error(ErrorKind::CorruptPayload, "row count exceeds payload");
  fm.values = Matrix(rows, cols);
  fm.subjects.resize(rows);
  fm.labels.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    fm.subjects[i] = r.get_string();
    const auto label = r.get<std::uint8_t>();
    if (label > 1) throw Error(ErrorKind::CorruptPayload, "bad label byte");
    fm.labels[i] = static_cast<PainLabel>(label);
    for (auto& v : fm.values.row(i)) v = r.get<double>();
  }
  return fm;
}

void write_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& path) {
  write_file_bytes(path.string(), encode_feature_matrix(fm));
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  return decode_feature_matrix(read_file_bytes(path.string()));
}

StandardizationState fit_standardization(const Matrix& rows, double sd_floor) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "standardization needs at least one training row");
  StandardizationState s;
  s.sd_floor = sd_floor;
  s.mean.assign(d, 0.0);
  s.sd.assign(d, 0.0);
  s.constant.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = rows(i, j);
      if (std::isnan(v)) continue;
      sum += v;
      ++count;
    }
    const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = rows(i, j);
      if (!std::isnan(v)) ss += (v - mean) * (v - mean);  // imputed rows contribute 0
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.mean[j] = mean;
    s.constant[j] = !(sd >= sd_floor);
    s.sd[j] = s.constant[j] ? sd_floor : sd;
  }
  s.fitted = true;
  return s;
}

StandardizationState fit_standardization(std::span<const FeatureVector> training, double sd_floor) {
  if (training.empty()) throw Error(ErrorKind::InvalidArgument, "standardization needs at least one training row");
  Matrix rows(training.size(), training.front().values.size());
  for (std::size_t i = 0; i < training.size(); ++i) {
    if (training[i].values.size() != rows.cols()) throw Error(ErrorKind::InvalidArgument, "ragged feature vectors");
    std::copy(training[i].values.begin(), training[i].values.end(), rows.row(i).begin());
  }
  return fit_standardization(rows, sd_floor);
}

void apply_standardization_into(const StandardizationState& state, std::span<const double> values,
                                std::span<double> out) {
  if (!state.fitted) throw Error(ErrorKind::NotFitted, "standardization state");
  if (values.size() != state.slots() || out.size() != state.slots())
    throw Error(ErrorKind::InvalidArgument, "slot count differs from standardization state");
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (state.constant[j]) {
      out[j] = 0.0;
      continue;
    }
    const double v = std::isnan(values[j]) ? state.mean[j] : values[j];
    out[j] = (v - state.mean[j]) / state.sd[j];
  }
}

std::vector<double> apply_standardization(const StandardizationState& state, std::span<const double> values) {
  std::vector<double> out(values.size());
  apply_standardization_into(state, values, out);
  return out;
}

Matrix apply_standardization(const StandardizationState& state, const Matrix& rows) {
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < rows.rows(); ++i) apply_standardization_into(state, rows.row(i), out.row(i));
  return out;
}

}  // namespace painscope
