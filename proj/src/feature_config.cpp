#include "painscope/feature_config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "painscope/error.hpp"

namespace painscope {

using nlohmann::json;

namespace {

json welch_json(const WelchParams& w) { return {{"segment_seconds", w.segment_seconds}, {"overlap", w.overlap}}; }

void read_welch(const json& j, WelchParams& w) {
  w.segment_seconds = j.value("segment_seconds", w.segment_seconds);
  w.overlap = j.value("overlap", w.overlap);
}

}  // namespace

std::string feature_config_json(const FeatureConfig& cfg, std::string_view preset) {
  json bands = json::object();
  for (const auto& b : cfg.bands) bands[std::string(b.name)] = {b.lo_hz, b.hi_hz};
  json subwindows = json::array();
  for (const auto& s : cfg.subwindows) subwindows.push_back({s.start_ms, s.end_ms});
  json pairs = json::array();
  for (const auto& [a, b] : cfg.coherence_pairs) pairs.push_back({a, b});
  const json j{{"format", kFeatureConfigFormat},
               {"preset", preset},
               {"bands_hz", bands},
               {"subwindows_ms", subwindows},
               {"subwindow_nfft", cfg.subwindow_nfft},
               {"sampen_m", cfg.sampen_m},
               {"sampen_r_factor", cfg.sampen_r_factor},
               {"higuchi_kmax", cfg.higuchi_kmax},
               {"wavelet_levels", cfg.wavelet_levels},
               {"coherence_pairs", pairs},
               {"coherence_band_hz", {cfg.coherence_lo_hz, cfg.coherence_hi_hz}},
               {"welch", welch_json(cfg.welch)},
               {"coherence_welch", welch_json(cfg.coherence_welch)}};
  return j.dump(2) + "\n";
}

FeatureConfig parse_feature_config(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", std::string{}) != kFeatureConfigFormat)
      throw Error(ErrorKind::VersionMismatch, "feature config must declare \"format\": \"" +
                                                  std::string(kFeatureConfigFormat) + "\"");
    const std::string preset = j.value("preset", std::string("epoch"));
    FeatureConfig cfg;
    if (preset == "realtime") cfg = FeatureConfig::realtime_default();
    else if (preset != "epoch") throw Error(ErrorKind::InvalidArgument, "unknown feature preset \"" + preset + "\"");

    if (j.contains("bands_hz")) {
      for (const auto& [name, edges] : j["bands_hz"].items()) {
        auto it = std::find_if(cfg.bands.begin(), cfg.bands.end(), [&](const Band& b) { return b.name == name; });
        if (it == cfg.bands.end()) throw Error(ErrorKind::InvalidArgument, "unknown band \"" + name + "\"");
        it->lo_hz = edges.at(0).get<double>();
        it->hi_hz = edges.at(1).get<double>();
      }
    }
    if (j.contains("subwindows_ms")) {
      cfg.subwindows.clear();
      for (const auto& s : j["subwindows_ms"]) cfg.subwindows.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    }
    if (j.contains("coherence_pairs")) {
      cfg.coherence_pairs.clear();
      for (const auto& p : j["coherence_pairs"])
        cfg.coherence_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    }
    if (j.contains("coherence_band_hz")) {
      cfg.coherence_lo_hz = j["coherence_band_hz"].at(0).get<double>();
      cfg.coherence_hi_hz = j["coherence_band_hz"].at(1).get<double>();
    }
    cfg.subwindow_nfft = j.value("subwindow_nfft", cfg.subwindow_nfft);
    cfg.sampen_m = j.value("sampen_m", cfg.sampen_m);
    cfg.sampen_r_factor = j.value("sampen_r_factor", cfg.sampen_r_factor);
    cfg.higuchi_kmax = j.value("higuchi_kmax", cfg.higuchi_kmax);
    cfg.wavelet_levels = j.value("wavelet_levels", cfg.wavelet_levels);
    if (j.contains("welch")) read_welch(j["welch"], cfg.welch);
    if (j.contains("coherence_welch")) read_welch(j["coherence_welch"], cfg.coherence_welch);
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("feature config: ") + e.what());
  }
}

FeatureConfig load_feature_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open feature config " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse_feature_config(s.str());
}

}  // namespace painscope
