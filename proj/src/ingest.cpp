#include "painscope/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "painscope/binary_io.hpp"
#include "painscope/error.hpp"

namespace painscope {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Commas inside fields are written as "\1" by the format.
std::string unescape_field(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && s[i + 1] == '1') {
      out.push_back(',');
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string escape_field(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ',') out += "\\1";
    else out.push_back(c);
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

struct IniLine {
  std::size_t line_number;
  std::string key;  // as written
  std::string value;
};

// Section name (lower-cased) → key/value lines in file order.
using IniSections = std::map<std::string, std::vector<IniLine>>;

IniSections parse_ini(std::string_view text) {
  IniSections sections;
  std::vector<IniLine>* current = nullptr;
  std::size_t line_number = 0;
  for (auto raw : split(text, '\n')) {
    ++line_number;
    auto line = trim(raw);
    if (line.empty() || line.front() == ';') continue;
    if (line.front() == '[' && line.back() == ']') {
      current = &sections[lower(trim(line.substr(1, line.size() - 2)))];
      continue;
    }
    if (current == nullptr) continue;  // identification line before the first section
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      current->push_back({line_number, std::string(trim(line)), {}});
      continue;
    }
    current->push_back({line_number, std::string(trim(line.substr(0, eq))), std::string(line.substr(eq + 1))});
  }
  return sections;
}

const std::vector<IniLine>& require_section(const IniSections& sections, std::string_view name) {
  const auto it = sections.find(lower(name));
  if (it == sections.end()) throw Error(ErrorKind::MissingSection, "[" + std::string(name) + "]");
  return it->second;
}

std::optional<std::string> find_key(const std::vector<IniLine>& lines, std::string_view key) {
  const auto wanted = lower(key);
  for (const auto& l : lines)
    if (lower(l.key) == wanted) return std::string(trim(l.value));
  return std::nullopt;
}

std::string require_key(const std::vector<IniLine>& lines, std::string_view key) {
  auto v = find_key(lines, key);
  if (!v || v->empty()) throw Error(ErrorKind::MissingRequiredKey, std::string(key));
  return *v;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

std::string_view to_string(PainLabel label) noexcept {
  return label == PainLabel::High ? "high_pain" : "low_pain";
}

std::vector<std::string> EpochSet::subjects() const {
  std::set<std::string> s;
  for (const auto& e : epochs) s.insert(e.subject_id);
  return {s.begin(), s.end()};
}

std::size_t EpochSet::count(std::string_view subject, PainLabel label) const {
  return static_cast<std::size_t>(std::count_if(epochs.begin(), epochs.end(), [&](const Epoch& e) {
    return e.subject_id == subject && e.label == label;
  }));
}

std::size_t EpochSet::count(PainLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(epochs.begin(), epochs.end(), [&](const Epoch& e) { return e.label == label; }));
}

RecordingHeader parse_header(std::string_view text) {
  const auto sections = parse_ini(text);
  const auto& common = require_section(sections, "Common Infos");
  const auto& binary = require_section(sections, "Binary Infos");
  const auto& channels = require_section(sections, "Channel Infos");

  RecordingHeader h;
  h.data_filename = require_key(common, "DataFile");
  h.marker_filename = find_key(common, "MarkerFile").value_or("");

  const auto data_format = lower(find_key(common, "DataFormat").value_or("BINARY"));
  if (data_format != "binary") throw Error(ErrorKind::UnsupportedBinaryFormat, "DataFormat=" + data_format);

  const auto orientation = lower(find_key(common, "DataOrientation").value_or("MULTIPLEXED"));
  if (orientation == "multiplexed") h.orientation = Orientation::Multiplexed;
  else if (orientation == "vectorized") h.orientation = Orientation::Vectorized;
  else throw Error(ErrorKind::OrientationUnsupported, orientation);

  const auto n_channels = parse_number<std::size_t>(require_key(common, "NumberOfChannels"));
  if (!n_channels || *n_channels == 0) throw Error(ErrorKind::MissingRequiredKey, "NumberOfChannels (positive integer)");
  h.channel_count = *n_channels;

  const auto interval_us = parse_number<double>(require_key(common, "SamplingInterval"));
  if (!interval_us || !(*interval_us > 0.0)) throw Error(ErrorKind::MissingRequiredKey, "SamplingInterval (positive)");
  h.sampling_rate_hz = 1e6 / *interval_us;

  const auto fmt = lower(require_key(binary, "BinaryFormat"));
  if (fmt == "int_16") h.binary_format = BinaryFormat::Int16;
  else if (fmt == "ieee_float_32") h.binary_format = BinaryFormat::Float32;
  else throw Error(ErrorKind::UnsupportedBinaryFormat, fmt);

  h.channel_names.resize(h.channel_count);
  h.resolution_per_channel.assign(h.channel_count, 1.0);
  for (std::size_t i = 0; i < h.channel_count; ++i) {
    const auto key = "Ch" + std::to_string(i + 1);
    const auto value = find_key(channels, key);
    if (!value) throw Error(ErrorKind::MissingRequiredKey, key);
    const auto fields = split(*value, ',');
    h.channel_names[i] = unescape_field(trim(fields[0]));
    if (fields.size() > 1 && h.reference_label.empty()) h.reference_label = unescape_field(trim(fields[1]));
    if (fields.size() > 2 && !trim(fields[2]).empty()) {
      const auto res = parse_number<double>(fields[2]);
      if (!res) throw Error(ErrorKind::MissingRequiredKey, key + " resolution");
      h.resolution_per_channel[i] = *res;
    }
    if (fields.size() > 3) {
      const auto unit = std::string(trim(fields[3]));
      if (unit == "mV") h.resolution_per_channel[i] *= 1e3;
      else if (unit == "nV") h.resolution_per_channel[i] *= 1e-3;
    }
  }
  return h;
}

MarkerList parse_markers(std::string_view text) {
  MarkerList out;
  if (trim(text).empty()) return out;
  const auto sections = parse_ini(text);
  const auto it = sections.find("marker infos");
  if (it == sections.end()) return out;

  for (const auto& line : it->second) {
    if (line.key.size() < 3 || lower(line.key.substr(0, 2)) != "mk") continue;
    const auto malformed = [&](const std::string& why) {
      return Error(ErrorKind::MalformedMarkerLine, "line " + std::to_string(line.line_number) + ": " + why);
    };
    const auto ordinal = parse_number<std::uint32_t>(std::string_view(line.key).substr(2));
    if (!ordinal) throw malformed("bad marker key '" + line.key + "'");
    const auto fields = split(line.value, ',');
    if (fields.size() < 5) throw malformed("expected at least 5 fields");
    MarkerEvent ev;
    ev.index = *ordinal;
    ev.kind = unescape_field(trim(fields[0]));
    ev.description = unescape_field(fields[1]);
    const auto pos = parse_number<std::uint64_t>(fields[2]);
    const auto dur = parse_number<std::uint64_t>(fields[3]);
    const auto chan = parse_number<std::int32_t>(fields[4]);
    if (!pos) throw malformed("bad position");
    if (!dur) throw malformed("bad duration");
    if (!chan) throw malformed("bad channel");
    ev.position_samples = *pos;
    ev.duration_samples = *dur;
    ev.channel_ref = *chan;
    out.events.push_back(std::move(ev));
  }
  if (!std::is_sorted(out.events.begin(), out.events.end(),
                      [](const auto& a, const auto& b) { return a.position_samples < b.position_samples; })) {
    out.resorted = true;
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const auto& a, const auto& b) { return a.position_samples < b.position_samples; });
  }
  return out;
}

Matrix read_signal(std::span<const std::uint8_t> bytes, const RecordingHeader& header) {
  const std::size_t n_ch = header.channel_count;
  const std::size_t bps = header.bytes_per_sample();
  const std::size_t frame = n_ch * bps;
  if (frame == 0) throw Error(ErrorKind::InvalidArgument, "header has no channels");
  if (bytes.size() % frame != 0)
    throw Error(ErrorKind::TruncatedData, std::to_string(bytes.size() % frame) + " trailing bytes");
  const std::size_t n = bytes.size() / frame;

  Matrix out(n_ch, n);
  const auto raw_at = [&](std::size_t offset) -> double {
    if (header.binary_format == BinaryFormat::Int16) {
      std::int16_t v;
      std::memcpy(&v, bytes.data() + offset, 2);
      return v;
    }
    float v;
    std::memcpy(&v, bytes.data() + offset, 4);
    return v;
  };
  for (std::size_t c = 0; c < n_ch; ++c) {
    const double res = header.resolution_per_channel[c];
    auto row = out.row(c);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t idx = header.orientation == Orientation::Multiplexed ? t * n_ch + c : c * n + t;
      row[t] = raw_at(idx * bps) * res;
    }
  }
  return out;
}

RawRecording load_recording(const std::filesystem::path& header_path, std::optional<std::string> subject_override) {
  RawRecording rec;
  rec.header = parse_header(read_file_text(header_path.string()));
  const auto dir = header_path.parent_path();

  const auto data_path = dir / rec.header.data_filename;
  if (!std::filesystem::exists(data_path)) throw Error(ErrorKind::CompanionFileMissing, data_path.string());
  rec.samples = read_signal(read_file_bytes(data_path.string()), rec.header);

  if (!rec.header.marker_filename.empty()) {
    const auto marker_path = dir / rec.header.marker_filename;
    if (!std::filesystem::exists(marker_path)) throw Error(ErrorKind::CompanionFileMissing, marker_path.string());
    rec.markers = parse_markers(read_file_text(marker_path.string())).events;
  }
  const auto n = rec.n_samples();
  std::erase_if(rec.markers, [n](const MarkerEvent& m) { return m.position_samples >= n; });
  rec.subject_id = subject_override.value_or(header_path.stem().string());
  return rec;
}

std::string format_header(const RecordingHeader& h) {
  std::ostringstream s;
  s << "Brain Vision Data Exchange Header File Version 1.0\n"
    << "; Data created by painscope\n\n"
    << "[Common Infos]\n"
    << "Codepage=UTF-8\n"
    << "DataFile=" << h.data_filename << "\n";
  if (!h.marker_filename.empty()) s << "MarkerFile=" << h.marker_filename << "\n";
  s << "DataFormat=BINARY\n"
    << "DataOrientation=" << (h.orientation == Orientation::Multiplexed ? "MULTIPLEXED" : "VECTORIZED") << "\n"
    << "NumberOfChannels=" << h.channel_count << "\n"
    << "SamplingInterval=" << format_double(1e6 / h.sampling_rate_hz) << "\n\n"
    << "[Binary Infos]\n"
    << "BinaryFormat=" << (h.binary_format == BinaryFormat::Int16 ? "INT_16" : "IEEE_FLOAT_32") << "\n\n"
    << "[Channel Infos]\n"
    << "; Ch<n>=<name>,<reference>,<resolution>,<unit>\n";
  for (std::size_t i = 0; i < h.channel_count; ++i) {
    s << "Ch" << (i + 1) << "=" << escape_field(h.channel_names[i]) << "," << escape_field(h.reference_label) << ","
      << format_double(h.resolution_per_channel[i]) << ",µV\n";
  }
  return s.str();
}

std::string format_markers(std::span<const MarkerEvent> markers, std::string_view data_filename) {
  std::ostringstream s;
  s << "Brain Vision Data Exchange Marker File, Version 1.0\n\n"
    << "[Common Infos]\n"
    << "Codepage=UTF-8\n"
    << "DataFile=" << data_filename << "\n\n"
    << "[Marker Infos]\n"
    << "; Mk<n>=<kind>,<description>,<position>,<duration>,<channel>\n";
  std::uint32_t ordinal = 1;
  for (const auto& m : markers) {
    s << "Mk" << ordinal++ << "=" << escape_field(m.kind) << "," << escape_field(m.description) << ","
      << m.position_samples << "," << m.duration_samples << "," << m.channel_ref << "\n";
  }
  return s.str();
}

std::vector<std::uint8_t> encode_signal(const Matrix& samples, const RecordingHeader& h) {
  const std::size_t n_ch = samples.rows();
  const std::size_t n = samples.cols();
  ByteWriter w;
  w.bytes().reserve(n_ch * n * h.bytes_per_sample());
  const auto put = [&](std::size_t c, std::size_t t) {
    const double v = samples(c, t) / h.resolution_per_channel[c];
    if (h.binary_format == BinaryFormat::Int16) {
      const double clamped = std::clamp(std::round(v), -32768.0, 32767.0);
      w.put(static_cast<std::int16_t>(clamped));
    } else {
      w.put(static_cast<float>(v));
    }
  };
  if (h.orientation == Orientation::Multiplexed) {
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t c = 0; c < n_ch; ++c) put(c, t);
  } else {
    for (std::size_t c = 0; c < n_ch; ++c)
      for (std::size_t t = 0; t < n; ++t) put(c, t);
  }
  return w.take();
}

void write_bundle(const RawRecording& rec, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  RecordingHeader h = rec.header;
  h.data_filename = stem + ".eeg";
  h.marker_filename = stem + ".vmrk";
  h.channel_count = rec.samples.rows();
  std::ofstream(dir / (stem + ".vhdr")) << format_header(h);
  std::ofstream(dir / (stem + ".vmrk")) << format_markers(rec.markers, h.data_filename);
  write_file_bytes((dir / h.data_filename).string(), encode_signal(rec.samples, h));
}

std::string normalize_description(std::string_view description) {
  std::string out;
  for (unsigned char c : description)
    if (!std::isspace(c)) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

EpochSet extract_epochs(const RawRecording& rec, const EpochConfig& cfg) {
  const double fs = rec.header.sampling_rate_hz;
  const auto n_win = static_cast<std::size_t>(std::llround(cfg.epoch_seconds * fs));
  const auto offset = static_cast<std::int64_t>(std::llround(cfg.start_seconds * fs));
  const auto n_total = static_cast<std::int64_t>(rec.n_samples());

  std::map<std::string, PainLabel> labels;
  for (const auto& [desc, label] : cfg.label_map) labels[normalize_description(desc)] = label;
  std::set<std::string> skip;
  for (const auto& desc : cfg.skip_set) skip.insert(normalize_description(desc));

  EpochSet set;
  set.channel_names = rec.header.channel_names;
  std::size_t mapped = 0;
  for (const auto& m : rec.markers) {
    const auto key = normalize_description(m.description);
    if (skip.contains(key)) {
      ++set.skipped_markers;
      continue;
    }
    const auto it = labels.find(key);
    if (it == labels.end()) continue;
    ++mapped;
    const auto start = static_cast<std::int64_t>(m.position_samples) + offset;
    if (start < 0 || start + static_cast<std::int64_t>(n_win) > n_total) continue;

    Epoch e;
    e.subject_id = rec.subject_id;
    e.label = it->second;
    e.onset_sample = m.position_samples;
    e.fs_hz = fs;
    e.channel_mask.assign(rec.samples.rows(), true);
    e.samples = Matrix(rec.samples.rows(), n_win);
    for (std::size_t c = 0; c < rec.samples.rows(); ++c) {
      const auto src = rec.samples.row(c).subspan(static_cast<std::size_t>(start), n_win);
      std::copy(src.begin(), src.end(), e.samples.row(c).begin());
    }
    set.epochs.push_back(std::move(e));
  }
  if (mapped == 0) throw Error(ErrorKind::NoStimulusMarkers, "recording " + rec.subject_id);
  return set;
}

std::vector<std::uint8_t> encode_epoch_cache(const EpochSet& set) {
  ByteWriter w;
  w.put_raw(kEpochCacheMagic);
  w.put(kEpochCacheVersion);
  w.put(static_cast<std::uint16_t>(set.channel_names.size()));
  for (const auto& name : set.channel_names) w.put_string(name);
  w.put(static_cast<std::uint64_t>(set.skipped_markers));
  w.put(static_cast<std::uint64_t>(set.epochs.size()));
  for (const auto& e : set.epochs) {
    if (e.samples.rows() != set.channel_names.size())
      throw Error(ErrorKind::InvalidArgument, "epoch channel count differs from set");
    w.put_string(e.subject_id);
    w.put(static_cast<std::uint8_t>(e.label));
    w.put(static_cast<std::uint64_t>(e.onset_sample));
    w.put(e.fs_hz);
    w.put(static_cast<std::uint64_t>(e.samples.cols()));
    for (std::size_t c = 0; c < e.samples.rows(); ++c) w.put(static_cast<std::uint8_t>(e.channel_mask[c] ? 1 : 0));
    for (double v : e.samples.storage()) w.put(static_cast<float>(v));
  }
  return w.take();
}

EpochSet decode_epoch_cache(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::BadCacheFile);
  if (r.get_raw(kEpochCacheMagic.size()) != kEpochCacheMagic) throw Error(ErrorKind::BadCacheFile, "bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kEpochCacheVersion)
    throw Error(ErrorKind::VersionMismatch, "epoch cache version " + std::to_string(version));
  EpochSet set;
  const auto n_ch = r.get<std::uint16_t>();
  for (std::size_t c = 0; c < n_ch; ++c) set.channel_names.push_back(r.get_string());
  set.skipped_markers = r.get<std::uint64_t>();
  const auto n_epochs = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_epochs; ++i) {
    Epoch e;
    e.subject_id = r.get_string();
    const auto label = r.get<std::uint8_t>();
    if (label > 1) throw Error(ErrorKind::BadCacheFile, "bad label byte");
    e.label = static_cast<PainLabel>(label);
    e.onset_sample = r.get<std::uint64_t>();
    e.fs_hz = r.get<double>();
    const auto n = r.get<std::uint64_t>();
    if (n > r.remaining()) throw Error(ErrorKind::BadCacheFile, "epoch length exceeds file");
    e.channel_mask.resize(n_ch);
    for (std::size_t c = 0; c < n_ch; ++c) e.channel_mask[c] = r.get<std::uint8_t>() != 0;
    e.samples = Matrix(n_ch, n);
    for (auto& v : e.samples.storage()) v = r.get<float>();
    set.epochs.push_back(std::move(e));
  }
  return set;
}

void write_epoch_cache(const EpochSet& set, const std::filesystem::path& path) {
  write_file_bytes(path.string(), encode_epoch_cache(set));
}

EpochSet read_epoch_cache(const std::filesystem::path& path) { return decode_epoch_cache(read_file_bytes(path.string())); }

}  // namespace painscope
