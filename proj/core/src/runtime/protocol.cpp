#include "coforge/runtime/protocol.hpp"

#include <zlib.h>

#include <cerrno>
#include <cstring>

#include <sys/socket.h>
#include <unistd.h>

namespace coforge::runtime {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u32(out, bits);
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

float get_f32(const uint8_t* p) {
  const uint32_t bits = get_u32(p);
  float v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

std::vector<uint8_t> encode_frame(const Frame& frame) {
  std::vector<uint8_t> out;
  out.reserve(kHeaderBytes + frame.payload.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(frame.version);
  out.push_back(static_cast<uint8_t>(frame.msg_type));
  put_u32(out, frame.batch_id);
  out.push_back(frame.flags);
  put_u32(out, static_cast<uint32_t>(frame.payload.size()));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

namespace {

bool known_type(uint8_t t) {
  return t >= static_cast<uint8_t>(MsgType::Hello) &&
         t <= static_cast<uint8_t>(MsgType::Error);
}

}  // namespace

Frame decode_frame(const uint8_t* data, size_t len) {
  if (len < kHeaderBytes) throw ProtocolError("frame shorter than header");
  if (std::memcmp(data, kMagic, 4) != 0) throw ProtocolError("bad magic");
  Frame frame;
  frame.version = data[4];
  if (!known_type(data[5]))
    throw ProtocolError("unknown msg_type " + std::to_string(data[5]));
  frame.msg_type = static_cast<MsgType>(data[5]);
  frame.batch_id = get_u32(data + 6);
  frame.flags = data[10];
  const uint32_t payload_len = get_u32(data + 11);
  if (len != kHeaderBytes + payload_len)
    throw ProtocolError("payload_len does not match frame size");
  frame.payload.assign(data + kHeaderBytes, data + len);
  return frame;
}

bool codec_known(const std::string& codec) {
  return codec == "identity" || codec == "zlib";
}

std::vector<uint8_t> codec_compress(const std::string& codec,
                                    const std::vector<uint8_t>& raw) {
  if (codec == "identity") return raw;
  if (codec != "zlib") throw ProtocolError("unknown codec: " + codec);
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  // Leading u32 carries the original size so inflation can allocate exactly.
  std::vector<uint8_t> out;
  out.reserve(4 + bound);
  put_u32(out, static_cast<uint32_t>(raw.size()));
  out.resize(4 + bound);
  const int rc = compress2(out.data() + 4, &bound, raw.data(),
                           static_cast<uLong>(raw.size()), Z_DEFAULT_COMPRESSION);
  if (rc != Z_OK) throw ProtocolError("zlib compress failed");
  out.resize(4 + bound);
  return out;
}

std::vector<uint8_t> codec_decompress(const std::string& codec,
                                      const std::vector<uint8_t>& packed) {
  if (codec == "identity") return packed;
  if (codec != "zlib") throw ProtocolError("unknown codec: " + codec);
  if (packed.size() < 4) throw ProtocolError("zlib payload too short");
  const uint32_t raw_len = get_u32(packed.data());
  std::vector<uint8_t> out(raw_len);
  uLongf got = raw_len;
  const int rc = uncompress(out.data(), &got, packed.data() + 4,
                            static_cast<uLong>(packed.size() - 4));
  if (rc != Z_OK || got != raw_len) throw ProtocolError("zlib decompress failed");
  return out;
}

namespace {

void write_all(int fd, const uint8_t* data, size_t len) {
  size_t sent = 0;
  while (sent < len) {
    const ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<size_t>(n);
  }
}

// Returns bytes read; short count only at EOF.
size_t read_upto(int fd, uint8_t* data, size_t len) {
  size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
    }
    if (n == 0) break;
    got += static_cast<size_t>(n);
  }
  return got;
}

}  // namespace

void write_frame(int fd, const Frame& frame) {
  const std::vector<uint8_t> bytes = encode_frame(frame);
  write_all(fd, bytes.data(), bytes.size());
}

bool read_frame(int fd, Frame& out) {
  uint8_t header[kHeaderBytes];
  const size_t got = read_upto(fd, header, kHeaderBytes);
  if (got == 0) return false;
  if (got < kHeaderBytes) throw ProtocolError("truncated frame header");
  if (std::memcmp(header, kMagic, 4) != 0) throw ProtocolError("bad magic");
  if (!known_type(header[5]))
    throw ProtocolError("unknown msg_type " + std::to_string(header[5]));
  out.version = header[4];
  out.msg_type = static_cast<MsgType>(header[5]);
  out.batch_id = get_u32(header + 6);
  out.flags = header[10];
  const uint32_t payload_len = get_u32(header + 11);
  out.payload.resize(payload_len);
  if (payload_len > 0 &&
      read_upto(fd, out.payload.data(), payload_len) < payload_len)
    throw ProtocolError("truncated frame payload");
  return true;
}

}  // namespace coforge::runtime
