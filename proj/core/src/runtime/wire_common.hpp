#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <thread>

#include "coforge/runtime/protocol.hpp"

namespace coforge::runtime {

/// Sender-side rate limiter: tokens are bytes, refilled continuously.
class TokenBucket {
 public:
  explicit TokenBucket(double bits_per_second)
      : rate_(bits_per_second / 8.0), last_(Clock::now()) {}

  void consume(size_t bytes) {
    if (rate_ <= 0) return;
    const auto now = Clock::now();
    tokens_ += std::chrono::duration<double>(now - last_).count() * rate_;
    last_ = now;
    if (tokens_ > kBurstBytes) tokens_ = kBurstBytes;
    tokens_ -= static_cast<double>(bytes);
    if (tokens_ < 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(-tokens_ / rate_));
      last_ = Clock::now();
      tokens_ = 0;
    }
  }

 private:
  using Clock = std::chrono::steady_clock;
  static constexpr double kBurstBytes = 16 * 1024;
  double rate_;
  double tokens_ = 0;
  Clock::time_point last_;
};

struct SendStats {
  uint64_t raw_bytes = 0;
  uint64_t wire_bytes = 0;
};

/// Applies the negotiated codec (payloads above the threshold), sets the
/// compressed flag, throttles, and writes the frame.
inline void send_data_frame(int fd, Frame frame, const std::string& codec,
                            TokenBucket& bucket, SendStats* stats) {
  const size_t raw = frame.payload.size();
  if (codec != "identity" && raw > kCompressThreshold) {
    frame.payload = codec_compress(codec, frame.payload);
    frame.flags |= kFlagCompressed;
  }
  if (stats) {
    stats->raw_bytes += raw;
    stats->wire_bytes += frame.payload.size();
  }
  bucket.consume(kHeaderBytes + frame.payload.size());
  write_frame(fd, frame);
}

inline std::vector<uint8_t> recv_payload(const Frame& frame,
                                         const std::string& codec) {
  if (frame.flags & kFlagCompressed)
    return codec_decompress(codec, frame.payload);
  return frame.payload;
}

}  // namespace coforge::runtime
