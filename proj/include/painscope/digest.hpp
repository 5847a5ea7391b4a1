#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace painscope {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::span<const std::uint8_t> bytes);
Sha256 sha256(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes);

/// SHA-1 + base64, as required by the WebSocket opening handshake.
std::string websocket_accept_key(std::string_view client_key);

}  // namespace painscope
