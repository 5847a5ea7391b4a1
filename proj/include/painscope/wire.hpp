#pragma once

// Ingest stream frames ("EEGS"), WebSocket framing and the control messages
// subscribers may send. Layouts are documented in docs/protocol.md.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "painscope/matrix.hpp"

namespace painscope {

// ---- EEGS ingest frames --------------------------------------------------

inline constexpr std::string_view kStreamMagic{"EEGS"};
inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::size_t kFrameHeaderBytes = 10;  // magic, version, type, u32 payload length
inline constexpr std::uint32_t kMaxFramePayload = 64u << 20;

enum class FrameType : std::uint8_t { Hello = 1, Chunk = 2, Bye = 3 };

struct HelloFrame {
  std::vector<std::string> channels;
  float rate_hz = 0.0f;
  bool operator==(const HelloFrame&) const = default;
};

struct ChunkFrame {
  std::uint64_t first_sample = 0;
  MatrixF samples;  // channel × n
  bool operator==(const ChunkFrame&) const = default;
};

struct Frame {
  FrameType type = FrameType::Bye;
  HelloFrame hello;
  ChunkFrame chunk;
};

std::vector<std::uint8_t> encode_hello(const HelloFrame& hello);
std::vector<std::uint8_t> encode_chunk(std::uint64_t first_sample, const MatrixF& samples);
std::vector<std::uint8_t> encode_bye();

/// Incremental decoder: feed arbitrary byte slices, pull whole frames.
/// Chunk frames are only valid after a hello (it fixes the channel count).
/// Malformed input throws ProtocolError.
class FrameDecoder {
public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Frame> next();
  std::size_t channels() const noexcept { return channels_; }

private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
  std::size_t channels_ = 0;
};

// ---- WebSocket (RFC 6455 subset: text, close, ping, pong; no extensions) --

enum class WsOpcode : std::uint8_t { Continuation = 0x0, Text = 0x1, Binary = 0x2, Close = 0x8, Ping = 0x9, Pong = 0xA };

struct WsFrame {
  bool fin = true;
  WsOpcode opcode = WsOpcode::Text;
  std::string payload;
};

/// Server frames are unmasked; pass a mask to build client frames.
std::vector<std::uint8_t> ws_encode(WsOpcode opcode, std::string_view payload,
                                    std::optional<std::array<std::uint8_t, 4>> mask = std::nullopt);

class WsDecoder {
public:
  /// Client-to-server frames must be masked (ProtocolError otherwise) unless
  /// `expect_masked` is false, as for a client reading server frames.
  explicit WsDecoder(bool expect_masked = true) : expect_masked_(expect_masked) {}
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<WsFrame> next();

private:
  bool expect_masked_;
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

/// Returns the 101 Switching Protocols response for a complete HTTP upgrade
/// request, std::nullopt while the header block is incomplete. Throws
/// ProtocolError when the request is not a WebSocket upgrade.
std::optional<std::string> ws_handshake_response(std::string_view request);

// ---- control messages ----------------------------------------------------

enum class ControlOp { SetThreshold, SetSustain, Pause, Resume };

struct ControlMessage {
  ControlOp op = ControlOp::Pause;
  double value = 0.0;  // threshold in (0, 1) or sustain seconds ≥ 0
};

std::string_view to_string(ControlOp op);

/// {"type":"control","op":"set_threshold","value":0.7}; "type" may be omitted.
/// Throws ProtocolError on malformed JSON, unknown ops or out-of-range values.
ControlMessage parse_control(std::string_view json_text);

}  // namespace painscope
