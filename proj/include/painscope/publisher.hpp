#pragma once

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "painscope/realtime.hpp"

namespace painscope {

struct PublisherConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 = ephemeral
  std::size_t queue_capacity = 256;
  int detect_timeout_ms = 250;  // silent clients are treated as JSON-lines subscribers
};

/// Fans event lines out to TCP subscribers. A client whose first bytes are an
/// HTTP GET is upgraded to WebSocket (one text frame per message); any other
/// client receives newline-delimited JSON. Each subscriber has a bounded
/// queue: when it is full the oldest message is dropped and a gap notice is
/// sent ahead of the next delivered one. Control messages from any subscriber
/// land in the mailbox; invalid ones are answered with an error message.
class Publisher {
public:
  explicit Publisher(PublisherConfig cfg = {});
  ~Publisher();
  Publisher(const Publisher&) = delete;
  Publisher& operator=(const Publisher&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void publish(const std::string& line);
  ControlMailbox& mailbox() noexcept { return mailbox_; }
  std::size_t subscriber_count() const;
  std::size_t dropped_total() const noexcept { return dropped_total_.load(); }
  void stop();

  struct Subscriber;

private:
  void accept_loop();
  void reap(bool all);

  PublisherConfig cfg_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> dropped_total_{0};
  ControlMailbox mailbox_;
  mutable std::mutex mutex_;
  std::list<std::shared_ptr<Subscriber>> subscribers_;
  std::thread acceptor_;
};

/// Minimal blocking TCP client used by tests and the CLI.
class LineClient {
public:
  LineClient(const std::string& host, std::uint16_t port);
  ~LineClient();
  void send_raw(std::string_view bytes);
  /// Next newline-terminated line, or std::nullopt on timeout / close.
  std::optional<std::string> read_line(int timeout_ms);
  /// Raw bytes as they arrive (for WebSocket tests).
  std::string read_some(int timeout_ms);
  int fd() const noexcept { return fd_; }

private:
  int fd_ = -1;
  std::string buffer_;
};

/// "host:port" → parts; bare "port" means 127.0.0.1.
std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view text);

}  // namespace painscope
