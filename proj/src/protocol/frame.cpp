#include "pql3/protocol/frame.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdlib>

namespace pql3::protocol {

std::string to_string(MsgType t) {
  switch (t) {
    case MsgType::EvalKey: return "EvalKey";
    case MsgType::Plan: return "Plan";
    case MsgType::CiphertextBatch: return "CiphertextBatch";
    case MsgType::Result: return "Result";
    case MsgType::Error: return "Error";
  }
  return "unknown";
}

std::uint64_t max_payload() {
  constexpr std::uint64_t kDefault = 256ull << 20;
  const char* env = std::getenv("PQL3_MAX_PAYLOAD");
  if (!env || !*env) return kDefault;
  char* end = nullptr;
  auto v = std::strtoull(env, &end, 10);
  if (*end != '\0' || v == 0) throw ConfigError(std::string("PQL3_MAX_PAYLOAD is not a positive integer: ") + env);
  return v;
}

namespace {

std::uint32_t crc(std::span<const std::uint8_t> b) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  std::size_t off = 0;
  while (off < b.size()) {
    auto n = static_cast<uInt>(std::min<std::size_t>(b.size() - off, 1u << 30));
    c = crc32(c, b.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(c);
}

struct Header {
  std::uint32_t version;
  std::uint8_t type;
  std::uint64_t len;
};

// Only the checks that keep the stream in sync: magic and length.
Header parse_header(std::span<const std::uint8_t> h) {
  if (!std::equal(kMagic.begin(), kMagic.end(), h.begin())) throw FrameDesync("bad frame magic");
  ByteReader r(h.subspan(4, kHeaderSize - 4));
  Header out{r.u32(), r.u8(), r.u64()};
  if (out.len > max_payload())
    throw FrameDesync("payload length " + std::to_string(out.len) + " exceeds limit " + std::to_string(max_payload()));
  return out;
}

}  // namespace

std::uint64_t header_payload_len(std::span<const std::uint8_t> header) {
  if (header.size() < kHeaderSize) throw ProtocolError("frame shorter than header");
  return parse_header(header.first(kHeaderSize)).len;
}

Bytes encode_frame(MsgType type, std::span<const std::uint8_t> payload, std::uint32_t version) {
  if (payload.size() > max_payload()) throw ProtocolError("payload exceeds the frame size limit");
  ByteWriter w;
  w.raw(kMagic);
  w.u32(version);
  w.u8(static_cast<std::uint8_t>(type));
  w.u64(payload.size());
  w.raw(payload);
  w.u32(crc(payload));
  return w.take();
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize + kTrailerSize) throw ProtocolError("frame shorter than header");
  auto h = parse_header(bytes.first(kHeaderSize));
  if (h.version != kProtocolVersion)
    throw ProtocolError("protocol version mismatch: got " + std::to_string(h.version) + ", expected " +
                        std::to_string(kProtocolVersion));
  if (h.type < 1 || h.type > 5) throw ProtocolError("unknown message type " + std::to_string(h.type));
  if (bytes.size() != kHeaderSize + h.len + kTrailerSize) throw ProtocolError("payload length does not match frame");
  auto payload = bytes.subspan(kHeaderSize, h.len);
  ByteReader tail(bytes.subspan(kHeaderSize + h.len));
  if (tail.u32() != crc(payload)) throw ProtocolError("frame checksum mismatch");
  return {static_cast<MsgType>(h.type), h.version, Bytes(payload.begin(), payload.end())};
}

std::optional<Bytes> read_frame_bytes(Transport& t) {
  Bytes buf(kHeaderSize);
  if (!t.read_exact(buf)) return std::nullopt;
  auto h = parse_header(buf);
  buf.resize(kHeaderSize + h.len + kTrailerSize);
  if (!t.read_exact(std::span(buf).subspan(kHeaderSize))) throw IoError("stream ended inside a frame");
  return buf;
}

Frame read_frame(Transport& t) {
  auto b = read_frame_bytes(t);
  if (!b) throw IoError("connection closed");
  return decode_frame(*b);
}

}  // namespace pql3::protocol
