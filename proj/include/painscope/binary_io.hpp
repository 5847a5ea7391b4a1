#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "painscope/error.hpp"

namespace painscope {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written little-endian; big-endian hosts need byte swapping");

/// Append-only little-endian byte sink.
class ByteWriter {
public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::span<const std::uint8_t> bytes) { bytes_.insert(bytes_.end(), bytes.begin(), bytes.end()); }
  void put_raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  /// u32 length prefix + bytes.
  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    put_raw(s);
  }

  template <typename T>
  void put_vector(std::span<const T> values) {
    put(static_cast<std::uint64_t>(values.size()));
    for (T v : values) put(v);
  }

  std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(bytes_); }

private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; overruns throw with `overrun_kind`.
class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> bytes, ErrorKind overrun_kind = ErrorKind::CorruptPayload)
      : bytes_(bytes), overrun_kind_(overrun_kind) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_raw(std::size_t n) {
    require(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::string get_string() { return get_raw(get<std::uint32_t>()); }

  template <typename T>
  std::vector<T> get_vector() {
    const auto n = get<std::uint64_t>();
    if (n > remaining() / sizeof(T)) throw Error(overrun_kind_, "vector length exceeds payload");
    std::vector<T> out(n);
    for (auto& v : out) v = get<T>();
    return out;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
  void require(std::size_t n) const {
    if (n > remaining()) throw Error(overrun_kind_, "unexpected end of data");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  ErrorKind overrun_kind_;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);
std::string read_file_text(const std::string& path);

}  // namespace painscope
