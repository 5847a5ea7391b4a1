#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "painscope/ingest.hpp"
#include "painscope/matrix.hpp"
#include "painscope/parallel.hpp"
#include "painscope/spectral.hpp"

namespace painscope {

inline constexpr std::size_t kFeatureSlots = 537;
inline constexpr std::size_t kPerChannelSlots = 37;
inline constexpr std::size_t kGlobalSlots = 17;

struct SubWindow {
  double start_ms;
  double end_ms;
};

struct FeatureConfig {
  std::vector<Band> bands{{"delta", 1, 4}, {"theta", 4, 8}, {"alpha", 8, 13}, {"beta", 13, 30}, {"gamma", 30, 90}};
  std::vector<SubWindow> subwindows{{0, 160}, {160, 300}, {300, 1000}};
  std::size_t subwindow_nfft = 1024;
  int sampen_m = 2;
  double sampen_r_factor = 0.2;
  int higuchi_kmax = 10;
  int wavelet_levels = 4;
  std::vector<std::pair<std::string, std::string>> coherence_pairs{{"C3", "C4"}, {"F3", "F4"}};
  double coherence_lo_hz = 1.0;
  double coherence_hi_hz = 40.0;
  WelchParams welch{1.0, 0.5};
  WelchParams coherence_welch{0.5, 0.5};

  /// 4-s epochs: 1-s Welch segments, 0.5-s coherence segments.
  static FeatureConfig epoch_default() { return {}; }
  /// 1-s streaming windows: 0.5-s Welch segments, 0.25-s coherence segments.
  static FeatureConfig realtime_default();

  void validate() const;
};

/// The 14-channel montage the default manifest is built for.
const std::vector<std::string>& default_channels();

struct ManifestEntry {
  std::size_t slot = 0;
  std::string feature;
  std::string channel;  // channel name, "A-B" pair, "global", or "" for padding
  std::string band_or_window;

  bool operator==(const ManifestEntry&) const = default;
};

enum class SlotKind : std::uint8_t { PerChannel, Coherence, GlobalPeak, GlobalWavelet, Pad };

struct FeatureManifest {
  static constexpr std::string_view kVersion = "painscope-features/1";

  std::vector<std::string> channels;
  std::vector<ManifestEntry> entries;  // exactly kFeatureSlots after canonicalization
  std::size_t native_slots = 0;        // before pad/truncate
  std::string version{kVersion};
  std::string content_hash;            // hex SHA-256 over version + entries

  bool truncated() const noexcept { return native_slots > kFeatureSlots; }
  bool padded() const noexcept { return native_slots < kFeatureSlots; }
  std::size_t slot_of(std::string_view feature, std::string_view channel, std::string_view band_or_window) const;

  /// Tab-separated, human-readable listing for audit.
  std::string to_text() const;
};

FeatureManifest build_manifest(const std::vector<std::string>& channels, const FeatureConfig& cfg = {});

struct FeatureVector {
  std::vector<double> values;      // kFeatureSlots; NaN marks imputation-pending
  std::vector<bool> imputed_mask;  // true where the slot awaits imputation
  std::vector<bool> flagged;       // degenerate-input conventions applied
  std::string manifest_hash;
  std::optional<PainLabel> label;
  std::string subject_id;
  bool pad_truncate_applied = false;

  std::size_t pending_count() const;
};

struct WindowView {
  const Matrix& samples;  // channel × n
  std::span<const std::string> channel_names;
  std::span<const bool> usable;  // empty = all usable
  double fs_hz;
};

FeatureVector extract_features(const WindowView& window, const FeatureConfig& cfg, const FeatureManifest& manifest,
                               ExecPolicy policy = ExecPolicy::Parallel);

FeatureVector extract_features(const Epoch& epoch, std::span<const std::string> channel_names,
                               const FeatureConfig& cfg, const FeatureManifest& manifest,
                               ExecPolicy policy = ExecPolicy::Parallel);

/// Rows of feature values (NaN = pending) with their subject and label.
struct FeatureMatrix {
  std::string manifest_hash;
  std::string manifest_version{FeatureManifest::kVersion};
  Matrix values;
  std::vector<std::string> subjects;
  std::vector<PainLabel> labels;

  std::size_t rows() const noexcept { return values.rows(); }
};

FeatureMatrix featurize(const EpochSet& set, const FeatureConfig& cfg, const FeatureManifest& manifest,
                        ExecPolicy policy = ExecPolicy::Parallel);

// Feature-matrix file:
//   magic "PSFEAT\0\0" | u16 version | manifest hash (u32 len + bytes) | manifest version (u32 len + bytes)
//   u64 rows | u64 cols | per row: subject (u32 len + bytes) | u8 label | f64 × cols (NaN = pending)
//   trailing SHA-256 of everything before it
inline constexpr std::string_view kFeatureFileMagic{"PSFEAT\0\0", 8};
inline constexpr std::uint16_t kFeatureFileVersion = 1;
std::vector<std::uint8_t> encode_feature_matrix(const FeatureMatrix& fm);
FeatureMatrix decode_feature_matrix(std::span<const std::uint8_t> bytes);
void write_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& path);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

struct StandardizationState {
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<bool> constant;  // SD below the floor: standardizes to 0
  double sd_floor = 1e-8;
  bool fitted = false;

  std::size_t slots() const noexcept { return mean.size(); }
  bool operator==(const StandardizationState&) const = default;
};

/// Mean imputation of pending (NaN) slots followed by per-slot z-scoring.
/// SDs are population SDs of the imputed training values.
StandardizationState fit_standardization(const Matrix& training_rows, double sd_floor = 1e-8);
StandardizationState fit_standardization(std::span<const FeatureVector> training, double sd_floor = 1e-8);
std::vector<double> apply_standardization(const StandardizationState& state, std::span<const double> values);
void apply_standardization_into(const StandardizationState& state, std::span<const double> values,
                                std::span<double> out);
Matrix apply_standardization(const StandardizationState& state, const Matrix& rows);

}  // namespace painscope
