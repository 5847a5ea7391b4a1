#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>

#include "json.hpp"
#include "painscope/error.hpp"
#include "painscope/publisher.hpp"

namespace painscope {

namespace {

[[noreturn]] void io_fail(const std::string& what) {
  throw Error(ErrorKind::IoError, what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = host.empty() || host == "localhost" ? "127.0.0.1" : host;
  if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1)
    throw Error(ErrorKind::InvalidArgument, "not an IPv4 address: " + host);
  return addr;
}

int listen_on(const std::string& host, std::uint16_t port, std::uint16_t& bound) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) io_fail("socket");
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(host, port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 16) != 0) {
    const int e = errno;
    ::close(fd);
    errno = e;
    io_fail("bind/listen on " + host + ":" + std::to_string(port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  bound = ntohs(addr.sin_port);
  return fd;
}

int connect_to(const std::string& host, std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) io_fail("socket");
  sockaddr_in addr = resolve(host, port);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const int e = errno;
    ::close(fd);
    errno = e;
    io_fail("connect to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

bool send_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return false;
    p += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

// Waits up to timeout_ms for readability; returns bytes read, 0 on close, -1 on timeout.
ssize_t recv_some(int fd, char* buf, std::size_t cap, int timeout_ms) {
  pollfd pfd{fd, POLLIN, 0};
  const int r = ::poll(&pfd, 1, timeout_ms);
  if (r == 0) return -1;
  if (r < 0) return errno == EINTR ? -1 : 0;
  const ssize_t n = ::recv(fd, buf, cap, 0);
  return n < 0 ? 0 : n;
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view text) {
  std::string host = "127.0.0.1";
  std::string_view port_text = text;
  if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
    if (colon > 0) host = std::string(text.substr(0, colon));
    port_text = text.substr(colon + 1);
  }
  unsigned port = 0;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535)
    throw Error(ErrorKind::InvalidArgument, "bad endpoint \"" + std::string(text) + "\" (expected host:port)");
  return {host, static_cast<std::uint16_t>(port)};
}

// ---- socket source -------------------------------------------------------

SocketSource::SocketSource(const std::string& host, std::uint16_t port) { listen_fd_ = listen_on(host, port, port_); }

SocketSource::~SocketSource() {
  if (fd_ >= 0) ::close(fd_);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void SocketSource::open() {
  while (fd_ < 0) {
    fd_ = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd_ < 0 && errno != EINTR) io_fail("accept");
  }
  char buf[65536];
  for (;;) {
    if (auto f = decoder_.next()) {
      if (f->type != FrameType::Hello) throw Error(ErrorKind::ProtocolError, "stream must start with a hello frame");
      hello_ = std::move(f->hello);
      return;
    }
    const ssize_t n = recv_some(fd_, buf, sizeof buf, 1000);
    if (n == 0) throw Error(ErrorKind::SourceClosed, "peer closed before hello");
    if (n > 0) decoder_.feed({reinterpret_cast<const std::uint8_t*>(buf), static_cast<std::size_t>(n)});
  }
}

std::optional<SourceChunk> SocketSource::next() {
  if (fd_ < 0) open();
  char buf[65536];
  for (;;) {
    if (closed_) return std::nullopt;
    if (auto f = decoder_.next()) {
      if (f->type == FrameType::Bye) return std::nullopt;
      if (f->type == FrameType::Hello) throw Error(ErrorKind::ProtocolError, "second hello on one stream");
      return SourceChunk{f->chunk.first_sample, std::move(f->chunk.samples)};
    }
    const ssize_t n = recv_some(fd_, buf, sizeof buf, 200);
    if (n == 0) return std::nullopt;
    if (n > 0) decoder_.feed({reinterpret_cast<const std::uint8_t*>(buf), static_cast<std::size_t>(n)});
  }
}

void SocketSource::close() {
  closed_ = true;
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void send_stream(StreamSource& source, const std::string& host, std::uint16_t port) {
  const int fd = connect_to(host, port);
  const auto send_or_throw = [&](const std::vector<std::uint8_t>& bytes) {
    if (!send_all(fd, bytes.data(), bytes.size())) {
      ::close(fd);
      throw Error(ErrorKind::SourceClosed, "stream listener went away");
    }
  };
  send_or_throw(encode_hello({source.channels(), static_cast<float>(source.rate_hz())}));
  while (auto c = source.next()) send_or_throw(encode_chunk(c->first_sample, c->samples));
  send_or_throw(encode_bye());
  ::close(fd);
}

// ---- publisher -----------------------------------------------------------

struct Publisher::Subscriber {
  int fd = -1;
  enum class Mode { Detecting, Lines, WebSocket } mode = Mode::Detecting;
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<std::string> queue;
  std::size_t dropped_pending = 0;
  std::atomic<bool> alive{true};
  std::thread reader;
  std::thread writer;

  bool send_message(const std::string& msg) {
    if (mode == Mode::WebSocket) {
      const auto frame = ws_encode(WsOpcode::Text, msg);
      return send_all(fd, frame.data(), frame.size());
    }
    const std::string line = msg + "\n";
    return send_all(fd, line.data(), line.size());
  }

  void enqueue(const std::string& msg, std::size_t capacity, std::atomic<std::size_t>& dropped_total) {
    {
      std::lock_guard lock(mutex);
      if (queue.size() >= capacity) {
        queue.pop_front();
        ++dropped_pending;
        ++dropped_total;
      }
      queue.push_back(msg);
    }
    cv.notify_one();
  }

  void kill() {
    alive = false;
    ::shutdown(fd, SHUT_RDWR);
    cv.notify_all();
  }
};

Publisher::Publisher(PublisherConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.queue_capacity == 0) throw Error(ErrorKind::InvalidArgument, "queue capacity must be positive");
  listen_fd_ = listen_on(cfg_.host, cfg_.port, port_);
  acceptor_ = std::thread([this] { accept_loop(); });
}

Publisher::~Publisher() { stop(); }

void Publisher::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  reap(true);
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

std::size_t Publisher::subscriber_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& s : subscribers_) n += s->alive ? 1 : 0;
  return n;
}

void Publisher::publish(const std::string& line) {
  std::lock_guard lock(mutex_);
  for (const auto& s : subscribers_)
    if (s->alive) s->enqueue(line, cfg_.queue_capacity, dropped_total_);
}

void Publisher::reap(bool all) {
  std::list<std::shared_ptr<Subscriber>> dead;
  {
    std::lock_guard lock(mutex_);
    for (auto it = subscribers_.begin(); it != subscribers_.end();) {
      if (all || !(*it)->alive) {
        dead.push_back(*it);
        it = subscribers_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& s : dead) {
    s->kill();
    if (s->reader.joinable()) s->reader.join();
    if (s->writer.joinable()) s->writer.join();
    ::close(s->fd);
  }
}

void Publisher::accept_loop() {
  while (!stopping_) {
    reap(false);
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto sub = std::make_shared<Subscriber>();
    sub->fd = fd;
    Subscriber* s = sub.get();

    s->writer = std::thread([this, s] {
      std::unique_lock lock(s->mutex);
      for (;;) {
        s->cv.wait(lock, [&] { return !s->alive || (s->mode != Subscriber::Mode::Detecting && !s->queue.empty()); });
        if (!s->alive) return;
        std::string msg = std::move(s->queue.front());
        s->queue.pop_front();
        const std::size_t gap = std::exchange(s->dropped_pending, 0);
        lock.unlock();
        bool ok = true;
        if (gap) ok = s->send_message(gap_json(gap));
        ok = ok && s->send_message(msg);
        lock.lock();
        if (!ok) {
          s->alive = false;
          return;
        }
      }
    });

    s->reader = std::thread([this, s] {
      std::string pending;
      WsDecoder ws;
      char buf[4096];
      const auto reply_error = [&](const std::string& what) {
        s->enqueue(nlohmann::json{{"type", "error"}, {"message", what}}.dump(), cfg_.queue_capacity, dropped_total_);
      };
      const auto handle_control = [&](std::string_view text) {
        if (text.empty()) return;
        try {
          mailbox_.post(parse_control(text));
        } catch (const Error& e) {
          reply_error(e.what());
        }
      };
      const auto set_mode = [&](Subscriber::Mode m) {
        {
          std::lock_guard lock(s->mutex);
          s->mode = m;
        }
        s->cv.notify_all();
      };
      bool timed_out_once = false;
      while (s->alive && !stopping_) {
        const int timeout = s->mode == Subscriber::Mode::Detecting ? cfg_.detect_timeout_ms : 200;
        const ssize_t n = recv_some(s->fd, buf, sizeof buf, timeout);
        if (n == 0) break;
        if (n < 0) {
          if (s->mode == Subscriber::Mode::Detecting && !timed_out_once && pending.empty()) {
            timed_out_once = true;
            set_mode(Subscriber::Mode::Lines);
          }
          continue;
        }
        if (s->mode == Subscriber::Mode::WebSocket) {
          try {
            ws.feed({reinterpret_cast<const std::uint8_t*>(buf), static_cast<std::size_t>(n)});
            while (auto f = ws.next()) {
              if (f->opcode == WsOpcode::Text) {
                handle_control(f->payload);
              } else if (f->opcode == WsOpcode::Ping) {
                const auto pong = ws_encode(WsOpcode::Pong, f->payload);
                std::lock_guard lock(s->mutex);
                send_all(s->fd, pong.data(), pong.size());
              } else if (f->opcode == WsOpcode::Close) {
                const auto close = ws_encode(WsOpcode::Close, "");
                std::lock_guard lock(s->mutex);
                send_all(s->fd, close.data(), close.size());
                s->alive = false;
              }
            }
          } catch (const Error&) {
            break;
          }
          continue;
        }
        pending.append(buf, static_cast<std::size_t>(n));
        if (s->mode == Subscriber::Mode::Detecting) {
          if (pending.size() < 4 && pending.front() == 'G') continue;
          if (pending.rfind("GET ", 0) == 0) {
            std::optional<std::string> resp;
            try {
              resp = ws_handshake_response(pending);
            } catch (const Error&) {
              const std::string bad = "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n";
              send_all(s->fd, bad.data(), bad.size());
              break;
            }
            if (!resp) continue;
            {
              std::lock_guard lock(s->mutex);
              send_all(s->fd, resp->data(), resp->size());
              s->mode = Subscriber::Mode::WebSocket;
            }
            s->cv.notify_all();
            const auto body = pending.find("\r\n\r\n") + 4;
            if (body < pending.size())
              ws.feed({reinterpret_cast<const std::uint8_t*>(pending.data() + body), pending.size() - body});
            pending.clear();
            continue;
          }
          set_mode(Subscriber::Mode::Lines);
        }
        std::size_t nl;
        while ((nl = pending.find('\n')) != std::string::npos) {
          std::string line = pending.substr(0, nl);
          if (!line.empty() && line.back() == '\r') line.pop_back();
          pending.erase(0, nl + 1);
          handle_control(line);
        }
      }
      s->alive = false;
      s->cv.notify_all();
    });

    std::lock_guard lock(mutex_);
    subscribers_.push_back(std::move(sub));
  }
}

// ---- line client ---------------------------------------------------------

LineClient::LineClient(const std::string& host, std::uint16_t port) : fd_(connect_to(host, port)) {}

LineClient::~LineClient() {
  if (fd_ >= 0) ::close(fd_);
}

void LineClient::send_raw(std::string_view bytes) {
  if (!send_all(fd_, bytes.data(), bytes.size())) throw Error(ErrorKind::IoError, "send failed");
}

std::optional<std::string> LineClient::read_line(int timeout_ms) {
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  char buf[4096];
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    const ssize_t n = recv_some(fd_, buf, sizeof buf, static_cast<int>(left.count()));
    if (n == 0) return std::nullopt;
    if (n > 0) buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

std::string LineClient::read_some(int timeout_ms) {
  if (!buffer_.empty()) return std::exchange(buffer_, {});
  char buf[65536];
  const ssize_t n = recv_some(fd_, buf, sizeof buf, timeout_ms);
  return n > 0 ? std::string(buf, static_cast<std::size_t>(n)) : std::string();
}

}  // namespace painscope
