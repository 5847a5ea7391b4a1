#include "painscope/wire.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "painscope/binary_io.hpp"
#include "painscope/digest.hpp"
#include "painscope/error.hpp"

namespace painscope {

namespace {

std::vector<std::uint8_t> frame(FrameType type, const std::vector<std::uint8_t>& payload) {
  ByteWriter w;
  w.put_raw(kStreamMagic);
  w.put(kStreamVersion);
  w.put(static_cast<std::uint8_t>(type));
  w.put(static_cast<std::uint32_t>(payload.size()));
  w.put_bytes(payload);
  return w.take();
}

// Drops consumed bytes once they dominate the buffer.
void compact(std::vector<std::uint8_t>& buffer, std::size_t& offset) {
  if (offset > 4096 && offset * 2 > buffer.size()) {
    buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(offset));
    offset = 0;
  }
}

}  // namespace

std::vector<std::uint8_t> encode_hello(const HelloFrame& hello) {
  if (hello.channels.empty() || hello.channels.size() > 0xFFFF)
    throw Error(ErrorKind::InvalidArgument, "hello needs 1..65535 channels");
  ByteWriter w;
  w.put(static_cast<std::uint16_t>(hello.channels.size()));
  w.put(hello.rate_hz);
  for (const auto& name : hello.channels) {
    if (name.size() > 0xFFFF) throw Error(ErrorKind::InvalidArgument, "channel name too long");
    w.put(static_cast<std::uint16_t>(name.size()));
    w.put_raw(name);
  }
  return frame(FrameType::Hello, w.take());
}

std::vector<std::uint8_t> encode_chunk(std::uint64_t first_sample, const MatrixF& samples) {
  ByteWriter w;
  w.put(first_sample);
  for (float v : samples.storage()) w.put(v);  // storage is already channel-major
  return frame(FrameType::Chunk, w.take());
}

std::vector<std::uint8_t> encode_bye() { return frame(FrameType::Bye, {}); }

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
  compact(buffer_, offset_);
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameDecoder::next() {
  const std::size_t avail = buffer_.size() - offset_;
  if (avail < kFrameHeaderBytes) return std::nullopt;
  const std::uint8_t* h = buffer_.data() + offset_;
  if (std::memcmp(h, kStreamMagic.data(), 4) != 0) throw Error(ErrorKind::ProtocolError, "bad frame magic");
  if (h[4] != kStreamVersion)
    throw Error(ErrorKind::ProtocolError, "unsupported stream version " + std::to_string(h[4]));
  const std::uint8_t type = h[5];
  std::uint32_t len;
  std::memcpy(&len, h + 6, 4);
  if (len > kMaxFramePayload) throw Error(ErrorKind::ProtocolError, "frame payload too large");
  if (avail < kFrameHeaderBytes + len) return std::nullopt;

  ByteReader r({h + kFrameHeaderBytes, len}, ErrorKind::ProtocolError);
  Frame f;
  switch (type) {
    case static_cast<std::uint8_t>(FrameType::Hello): {
      f.type = FrameType::Hello;
      const auto n = r.get<std::uint16_t>();
      f.hello.rate_hz = r.get<float>();
      if (n == 0) throw Error(ErrorKind::ProtocolError, "hello with zero channels");
      if (!(f.hello.rate_hz > 0.0f) || !std::isfinite(f.hello.rate_hz))
        throw Error(ErrorKind::ProtocolError, "hello with invalid rate");
      for (std::uint16_t i = 0; i < n; ++i) f.hello.channels.push_back(r.get_raw(r.get<std::uint16_t>()));
      channels_ = n;
      break;
    }
    case static_cast<std::uint8_t>(FrameType::Chunk): {
      f.type = FrameType::Chunk;
      if (channels_ == 0) throw Error(ErrorKind::ProtocolError, "chunk before hello");
      f.chunk.first_sample = r.get<std::uint64_t>();
      const std::size_t body = r.remaining();
      if (body % (4 * channels_) != 0) throw Error(ErrorKind::ProtocolError, "chunk size not a multiple of channels");
      const std::size_t n = body / (4 * channels_);
      f.chunk.samples = MatrixF(channels_, n);
      for (auto& v : f.chunk.samples.storage()) v = r.get<float>();
      break;
    }
    case static_cast<std::uint8_t>(FrameType::Bye):
      f.type = FrameType::Bye;
      break;
    default:
      throw Error(ErrorKind::ProtocolError, "unknown frame type " + std::to_string(type));
  }
  if (r.remaining() != 0) throw Error(ErrorKind::ProtocolError, "trailing bytes in frame");
  offset_ += kFrameHeaderBytes + len;
  return f;
}

// ---- WebSocket -----------------------------------------------------------

std::vector<std::uint8_t> ws_encode(WsOpcode opcode, std::string_view payload,
                                    std::optional<std::array<std::uint8_t, 4>> mask) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(0x80 | static_cast<std::uint8_t>(opcode)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<std::uint8_t>(mask_bit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(mask_bit | 126);
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
  } else {
    out.push_back(mask_bit | 127);
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(n >> s));
  }
  if (mask) out.insert(out.end(), mask->begin(), mask->end());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    auto b = static_cast<std::uint8_t>(payload[i]);
    out.push_back(mask ? static_cast<std::uint8_t>(b ^ (*mask)[i % 4]) : b);
  }
  return out;
}

void WsDecoder::feed(std::span<const std::uint8_t> bytes) {
  compact(buffer_, offset_);
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<WsFrame> WsDecoder::next() {
  const std::size_t avail = buffer_.size() - offset_;
  if (avail < 2) return std::nullopt;
  const std::uint8_t* p = buffer_.data() + offset_;
  if (p[0] & 0x70) throw Error(ErrorKind::ProtocolError, "websocket extensions are not negotiated");
  const bool masked = p[1] & 0x80;
  if (expect_masked_ && !masked) throw Error(ErrorKind::ProtocolError, "client frames must be masked");
  std::uint64_t n = p[1] & 0x7F;
  std::size_t head = 2;
  if (n == 126) {
    if (avail < 4) return std::nullopt;
    n = (std::uint64_t{p[2]} << 8) | p[3];
    head = 4;
  } else if (n == 127) {
    if (avail < 10) return std::nullopt;
    n = 0;
    for (int i = 0; i < 8; ++i) n = (n << 8) | p[2 + i];
    head = 10;
  }
  if (n > kMaxFramePayload) throw Error(ErrorKind::ProtocolError, "websocket frame too large");
  const std::size_t mask_len = masked ? 4 : 0;
  if (avail < head + mask_len + n) return std::nullopt;
  WsFrame f;
  f.fin = p[0] & 0x80;
  f.opcode = static_cast<WsOpcode>(p[0] & 0x0F);
  f.payload.resize(n);
  const std::uint8_t* key = p + head;
  const std::uint8_t* data = p + head + mask_len;
  for (std::size_t i = 0; i < n; ++i) f.payload[i] = static_cast<char>(masked ? data[i] ^ key[i % 4] : data[i]);
  offset_ += head + mask_len + n;
  return f;
}

std::optional<std::string> ws_handshake_response(std::string_view request) {
  const auto end = request.find("\r\n\r\n");
  if (end == std::string_view::npos) return std::nullopt;
  std::string key;
  bool upgrade = false;
  std::size_t pos = request.find("\r\n");
  if (request.substr(0, 4) != "GET ") throw Error(ErrorKind::ProtocolError, "expected an HTTP GET upgrade request");
  while (pos < end) {
    const std::size_t next = request.find("\r\n", pos + 2);
    const std::string_view line = request.substr(pos + 2, next - pos - 2);
    pos = next;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string name(line.substr(0, colon));
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    std::string_view value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    while (!value.empty() && value.back() == ' ') value.remove_suffix(1);
    if (name == "sec-websocket-key") key = value;
    if (name == "upgrade") {
      std::string v(value);
      std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
      upgrade = v == "websocket";
    }
  }
  if (!upgrade || key.empty()) throw Error(ErrorKind::ProtocolError, "missing websocket upgrade headers");
  return "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Accept: " +
         websocket_accept_key(key) + "\r\n\r\n";
}

// ---- control -------------------------------------------------------------

std::string_view to_string(ControlOp op) {
  switch (op) {
    case ControlOp::SetThreshold: return "set_threshold";
    case ControlOp::SetSustain: return "set_sustain";
    case ControlOp::Pause: return "pause";
    case ControlOp::Resume: return "resume";
  }
  return "pause";
}

ControlMessage parse_control(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ProtocolError, std::string("control message is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string())
    throw Error(ErrorKind::ProtocolError, "control message needs a string \"op\"");
  if (j.contains("type") && j["type"] != "control") throw Error(ErrorKind::ProtocolError, "not a control message");
  const std::string op = j["op"];
  const auto number = [&]() {
    if (!j.contains("value") || !j["value"].is_number())
      throw Error(ErrorKind::ProtocolError, op + " needs a numeric \"value\"");
    return j["value"].get<double>();
  };
  ControlMessage m;
  if (op == "set_threshold") {
    m.op = ControlOp::SetThreshold;
    m.value = number();
    if (!(m.value > 0.0 && m.value < 1.0)) throw Error(ErrorKind::ProtocolError, "threshold must be in (0, 1)");
  } else if (op == "set_sustain") {
    m.op = ControlOp::SetSustain;
    m.value = number();
    if (!(m.value >= 0.0 && m.value <= 3600.0)) throw Error(ErrorKind::ProtocolError, "sustain must be in [0, 3600] s");
  } else if (op == "pause") {
    m.op = ControlOp::Pause;
  } else if (op == "resume") {
    m.op = ControlOp::Resume;
  } else {
    throw Error(ErrorKind::ProtocolError, "unknown control op \"" + op + "\"");
  }
  return m;
}

}  // namespace painscope
