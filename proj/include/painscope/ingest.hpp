#pragma once

// Three-file recording bundle (BrainVision Core Format style):
//   <stem>.vhdr  INI-style ASCII header
//   <stem>.eeg   flat binary samples
//   <stem>.vmrk  INI-style ASCII marker list

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "painscope/matrix.hpp"

namespace painscope {

enum class BinaryFormat { Int16, Float32 };
enum class Orientation { Multiplexed, Vectorized };

struct RecordingHeader {
  std::vector<std::string> channel_names;
  std::size_t channel_count = 0;
  double sampling_rate_hz = 0.0;
  std::vector<double> resolution_per_channel;  // µV per raw count
  BinaryFormat binary_format = BinaryFormat::Int16;
  Orientation orientation = Orientation::Multiplexed;
  std::string reference_label;
  std::string data_filename;
  std::string marker_filename;

  std::size_t bytes_per_sample() const noexcept { return binary_format == BinaryFormat::Int16 ? 2 : 4; }
  bool operator==(const RecordingHeader&) const = default;
};

struct MarkerEvent {
  std::uint32_t index = 0;  // 1-based ordinal from the Mk<n> key
  std::string kind;
  std::string description;
  std::uint64_t position_samples = 0;
  std::uint64_t duration_samples = 0;
  std::int32_t channel_ref = 0;

  bool operator==(const MarkerEvent&) const = default;
};

struct MarkerList {
  std::vector<MarkerEvent> events;
  /// Set when the file listed markers out of position order (they are re-sorted).
  bool resorted = false;
};

struct RawRecording {
  RecordingHeader header;
  Matrix samples;  // channel_count × n_samples, µV
  std::vector<MarkerEvent> markers;
  std::string subject_id;

  std::size_t n_samples() const noexcept { return samples.cols(); }
};

enum class PainLabel : std::uint8_t { Low = 0, High = 1 };

std::string_view to_string(PainLabel label) noexcept;

struct Epoch {
  std::string subject_id;
  PainLabel label = PainLabel::Low;
  std::uint64_t onset_sample = 0;
  Matrix samples;  // channel × round(epoch_seconds × fs)
  double fs_hz = 0.0;
  std::vector<bool> channel_mask;  // true = usable
};

struct EpochSet {
  std::vector<std::string> channel_names;
  std::vector<Epoch> epochs;
  std::size_t skipped_markers = 0;

  std::vector<std::string> subjects() const;  // sorted, distinct
  std::size_t count(std::string_view subject, PainLabel label) const;
  std::size_t count(PainLabel label) const;
};

struct EpochConfig {
  double start_seconds = 0.0;
  double epoch_seconds = 4.0;
  /// Stimulus description → label. Matching ignores case and whitespace.
  std::map<std::string, PainLabel> label_map{{"S30", PainLabel::Low}, {"S70", PainLabel::High}};
  std::vector<std::string> skip_set{"S50"};
};

RecordingHeader parse_header(std::string_view text);
MarkerList parse_markers(std::string_view text);
Matrix read_signal(std::span<const std::uint8_t> bytes, const RecordingHeader& header);

/// Loads `<stem>.vhdr` plus the companion files it names (resolved relative to
/// the header's directory). Subject id defaults to the file stem.
RawRecording load_recording(const std::filesystem::path& header_path,
                            std::optional<std::string> subject_override = std::nullopt);

/// Writes the three-file bundle `<dir>/<stem>.{vhdr,eeg,vmrk}`. Int16 payloads
/// are quantized with the per-channel resolution.
void write_bundle(const RawRecording& rec, const std::filesystem::path& dir, const std::string& stem);

std::string format_header(const RecordingHeader& header);
std::string format_markers(std::span<const MarkerEvent> markers, std::string_view data_filename);
std::vector<std::uint8_t> encode_signal(const Matrix& samples, const RecordingHeader& header);

EpochSet extract_epochs(const RawRecording& rec, const EpochConfig& cfg = {});

/// Case- and whitespace-insensitive key used to match marker descriptions.
std::string normalize_description(std::string_view description);

// Epoch cache: columnar binary file so featurization can skip re-parsing.
//   magic "PSEPOCH\0" | u16 version | u16 channel count | channel names (u32 len + bytes)
//   u64 skipped | u64 epoch count | per epoch:
//     subject (u32 len + bytes) | u8 label | u64 onset | f64 fs | u64 n_samples
//     u8 mask per channel | f32 samples, channel-major
void write_epoch_cache(const EpochSet& set, const std::filesystem::path& path);
EpochSet read_epoch_cache(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_epoch_cache(const EpochSet& set);
EpochSet decode_epoch_cache(std::span<const std::uint8_t> bytes);
inline constexpr std::string_view kEpochCacheMagic{"PSEPOCH\0", 8};
inline constexpr std::uint16_t kEpochCacheVersion = 1;

}  // namespace painscope
