#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>

#include "painscope/matrix.hpp"

namespace painscope {

/// Fixed-capacity multichannel circular buffer with one writer and one reader.
/// The writer never waits; the reader copies under a sequence counter and
/// retries if a write overlapped the copy.
class RingBuffer {
public:
  RingBuffer(std::size_t channels, std::size_t capacity_samples);
  static RingBuffer for_seconds(std::size_t channels, double rate_hz, double seconds = 1.0);

  RingBuffer(RingBuffer&& other) noexcept;
  RingBuffer& operator=(RingBuffer&&) = delete;

  std::size_t channels() const noexcept { return channels_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t total_written() const noexcept { return written_.load(std::memory_order_acquire); }

  /// Appends a channel × n chunk. Throws ChannelMismatch.
  void push(const Matrix& chunk);
  void push(const MatrixF& chunk);

  struct Window {
    Matrix samples;              // channels × capacity, oldest first
    std::uint64_t end_sample = 0;  // total samples written when copied
    bool partial = false;        // buffer not yet full; front is zero-padded
  };
  Window snapshot() const;

private:
  template <typename M>
  void push_impl(const M& chunk);

  std::size_t channels_;
  std::size_t capacity_;
  std::unique_ptr<std::atomic<float>[]> data_;  // channel-major, capacity per channel
  std::atomic<std::uint64_t> written_{0};
  std::atomic<std::uint64_t> sequence_{0};
};

}  // namespace painscope
