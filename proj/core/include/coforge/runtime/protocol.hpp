#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace coforge::runtime {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MsgType : uint8_t {
  Hello = 1,
  Arch = 2,
  Tensor = 3,
  Graph = 4,
  Result = 5,
  Ack = 6,
  Bye = 7,
  Error = 8,
};

inline constexpr char kMagic[4] = {'C', 'F', 'G', '1'};
inline constexpr uint8_t kProtocolVersion = 1;
inline constexpr size_t kHeaderBytes = 15;
inline constexpr uint8_t kFlagCompressed = 0x01;
inline constexpr size_t kCompressThreshold = 4096;

struct Frame {
  uint8_t version = kProtocolVersion;
  MsgType msg_type = MsgType::Hello;
  uint32_t batch_id = 0;
  uint8_t flags = 0;
  std::vector<uint8_t> payload;
};

/// Bit-exact little-endian framing: magic, version, msg_type, batch_id,
/// flags, payload_len, payload.
std::vector<uint8_t> encode_frame(const Frame& frame);
/// Throws ProtocolError on bad magic, short buffer, length mismatch, or
/// unknown msg_type.
Frame decode_frame(const uint8_t* data, size_t len);

/// Lossless payload codecs; "identity" is always available.
std::vector<uint8_t> codec_compress(const std::string& codec,
                                    const std::vector<uint8_t>& raw);
std::vector<uint8_t> codec_decompress(const std::string& codec,
                                      const std::vector<uint8_t>& packed);
bool codec_known(const std::string& codec);

/// Blocking socket I/O. read_frame returns false on clean EOF at a frame
/// boundary and throws ProtocolError on malformed or truncated frames.
void write_frame(int fd, const Frame& frame);
bool read_frame(int fd, Frame& out);

// Little-endian scalar packing used by all payload layouts.
void put_u32(std::vector<uint8_t>& out, uint32_t v);
void put_f32(std::vector<uint8_t>& out, float v);
uint32_t get_u32(const uint8_t* p);
float get_f32(const uint8_t* p);

}  // namespace coforge::runtime
