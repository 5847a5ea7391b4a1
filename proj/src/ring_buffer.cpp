#include "painscope/ring_buffer.hpp"

#include <cmath>
#include <thread>

#include "painscope/error.hpp"

namespace painscope {

RingBuffer::RingBuffer(std::size_t channels, std::size_t capacity_samples)
    : channels_(channels), capacity_(capacity_samples) {
  if (channels == 0 || capacity_samples == 0)
    throw Error(ErrorKind::InvalidArgument, "ring buffer needs channels and capacity");
  data_ = std::make_unique<std::atomic<float>[]>(channels * capacity_samples);
  for (std::size_t i = 0; i < channels * capacity_samples; ++i) data_[i].store(0.0f, std::memory_order_relaxed);
}

RingBuffer RingBuffer::for_seconds(std::size_t channels, double rate_hz, double seconds) {
  return RingBuffer(channels, static_cast<std::size_t>(std::lround(rate_hz * seconds)));
}

RingBuffer::RingBuffer(RingBuffer&& other) noexcept
    : channels_(other.channels_),
      capacity_(other.capacity_),
      data_(std::move(other.data_)),
      written_(other.written_.load()),
      sequence_(other.sequence_.load()) {}

template <typename M>
void RingBuffer::push_impl(const M& chunk) {
  if (chunk.rows() != channels_)
    throw Error(ErrorKind::ChannelMismatch,
                std::to_string(chunk.rows()) + " channels pushed into a " + std::to_string(channels_) + "-channel buffer");
  const std::size_t n = chunk.cols();
  const std::uint64_t w = written_.load(std::memory_order_relaxed);
  // Only the newest `capacity` samples of an oversized chunk can survive.
  const std::size_t skip = n > capacity_ ? n - capacity_ : 0;
  const std::uint64_t seq = sequence_.load(std::memory_order_relaxed);
  sequence_.store(seq + 1, std::memory_order_relaxed);
  std::atomic_thread_fence(std::memory_order_release);
  for (std::size_t k = skip; k < n; ++k) {
    const std::size_t slot = static_cast<std::size_t>((w + k) % capacity_);
    for (std::size_t c = 0; c < channels_; ++c)
      data_[c * capacity_ + slot].store(static_cast<float>(chunk(c, k)), std::memory_order_relaxed);
  }
  written_.store(w + n, std::memory_order_release);
  sequence_.store(seq + 2, std::memory_order_release);
}

void RingBuffer::push(const Matrix& chunk) { push_impl(chunk); }
void RingBuffer::push(const MatrixF& chunk) { push_impl(chunk); }

RingBuffer::Window RingBuffer::snapshot() const {
  Window win;
  win.samples = Matrix(channels_, capacity_);
  for (;;) {
    const std::uint64_t s1 = sequence_.load(std::memory_order_acquire);
    if (s1 & 1) {
      std::this_thread::yield();
      continue;
    }
    const std::uint64_t w = written_.load(std::memory_order_acquire);
    const std::size_t have = static_cast<std::size_t>(std::min<std::uint64_t>(w, capacity_));
    const std::size_t pad = capacity_ - have;
    for (std::size_t c = 0; c < channels_; ++c) {
      double* out = win.samples.row(c).data();
      std::fill(out, out + pad, 0.0);
      for (std::size_t k = 0; k < have; ++k) {
        const std::size_t slot = static_cast<std::size_t>((w - have + k) % capacity_);
        out[pad + k] = data_[c * capacity_ + slot].load(std::memory_order_relaxed);
      }
    }
    std::atomic_thread_fence(std::memory_order_acquire);
    if (sequence_.load(std::memory_order_relaxed) == s1) {
      win.end_sample = w;
      win.partial = w < capacity_;
      return win;
    }
  }
}

}  // namespace painscope
