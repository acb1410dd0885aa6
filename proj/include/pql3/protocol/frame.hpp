#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "pql3/common/bytes.hpp"

namespace pql3::protocol {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'P', 'Q', 'C', '3'};
inline constexpr std::uint32_t kProtocolVersion = 1;
// magic, version, type, payload length
inline constexpr std::size_t kHeaderSize = 4 + 4 + 1 + 8;
inline constexpr std::size_t kTrailerSize = 4;

enum class MsgType : std::uint8_t { EvalKey = 1, Plan = 2, CiphertextBatch = 3, Result = 4, Error = 5 };
std::string to_string(MsgType t);

struct Frame {
  MsgType type = MsgType::Error;
  std::uint32_t version = kProtocolVersion;
  Bytes payload;
};

// Largest accepted payload: PQL3_MAX_PAYLOAD (bytes) or 256 MiB.
std::uint64_t max_payload();

Bytes encode_frame(MsgType type, std::span<const std::uint8_t> payload, std::uint32_t version = kProtocolVersion);

// Validates magic, version, type, length and CRC32 in that order; throws
// ProtocolError on the first failure. The payload is never interpreted here.
Frame decode_frame(std::span<const std::uint8_t> bytes);

// Byte stream carrying frames.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write(std::span<const std::uint8_t> bytes) = 0;
  // Fills `out` completely. Returns false on end of stream before the first
  // byte; IoError if the stream ends part way.
  virtual bool read_exact(std::span<std::uint8_t> out) = 0;
};

// Raised when a header cannot be trusted (bad magic or an oversized length):
// the stream position is lost and the connection must be dropped.
struct FrameDesync : ProtocolError {
  using ProtocolError::ProtocolError;
};

// Payload length announced by a header; FrameDesync if the header is bad.
std::uint64_t header_payload_len(std::span<const std::uint8_t> header);

// Reads the raw bytes of one frame; nullopt on a clean end of stream.
std::optional<Bytes> read_frame_bytes(Transport& t);
Frame read_frame(Transport& t);
inline void write_frame(Transport& t, MsgType type, std::span<const std::uint8_t> payload) {
  t.write(encode_frame(type, payload));
}

}  // namespace pql3::protocol
