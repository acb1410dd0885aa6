#include "pql3/protocol/messages.hpp"

#include <openssl/sha.h>

#include "pql3/common/error.hpp"
#include "pql3/protocol/frame.hpp"

namespace pql3::protocol {

namespace {

void put_cts(ByteWriter& w, const std::vector<fhe::LweCiphertext>& cts) {
  w.u32(static_cast<std::uint32_t>(cts.size()));
  for (const auto& c : cts) c.serialize(w);
}

std::vector<fhe::LweCiphertext> get_cts(ByteReader& r, const fhe::ParamsPtr& params, fhe::u64 key_id) {
  std::uint32_t n = r.u32();
  // Every ciphertext has a fixed size; reject impossible counts before allocating.
  auto each = fhe::LweCiphertext::serialized_size(static_cast<std::size_t>(params->lwe_dim));
  if (static_cast<std::uint64_t>(n) * each > r.remaining()) throw ProtocolError("ciphertext count exceeds payload");
  std::vector<fhe::LweCiphertext> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(fhe::LweCiphertext::deserialize(r, params, key_id));
  return out;
}

}  // namespace

Bytes BatchRequest::serialize() const {
  ByteWriter w;
  w.u64(segment);
  w.u8(reset ? 1 : 0);
  put_cts(w, inputs);
  return w.take();
}

BatchRequest BatchRequest::deserialize(std::span<const std::uint8_t> payload, fhe::ParamsPtr params, fhe::u64 key_id) {
  ByteReader r(payload);
  BatchRequest b;
  b.segment = r.u64();
  auto flags = r.u8();
  if (flags > 1) throw ProtocolError("unknown batch flags");
  b.reset = flags == 1;
  b.inputs = get_cts(r, params, key_id);
  r.expect_end();
  return b;
}

Bytes ResultMsg::serialize() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind));
  if (kind == Kind::Ack) {
    w.raw(digest);
    return w.take();
  }
  w.u64(segment);
  w.u64(pbs);
  w.f64(wall_seconds);
  put_cts(w, outputs);
  return w.take();
}

ResultMsg ResultMsg::deserialize(std::span<const std::uint8_t> payload, fhe::ParamsPtr params, fhe::u64 key_id) {
  ByteReader r(payload);
  ResultMsg m;
  auto kind = r.u8();
  if (kind > 1) throw ProtocolError("unknown result kind");
  m.kind = static_cast<Kind>(kind);
  if (m.kind == Kind::Ack) {
    auto d = r.raw(32);
    std::copy(d.begin(), d.end(), m.digest.begin());
  } else {
    m.segment = r.u64();
    m.pbs = r.u64();
    m.wall_seconds = r.f64();
    m.outputs = get_cts(r, params, key_id);
  }
  r.expect_end();
  return m;
}

Bytes ErrorMsg::serialize() const {
  ByteWriter w;
  w.str(message);
  return w.take();
}

ErrorMsg ErrorMsg::deserialize(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  ErrorMsg e{r.str()};
  r.expect_end();
  return e;
}

Bytes encode_error(const std::string& message) { return encode_frame(MsgType::Error, ErrorMsg{message}.serialize()); }

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes) {
  std::array<std::uint8_t, 32> d{};
  SHA256(bytes.data(), bytes.size(), d.data());
  return d;
}

}  // namespace pql3::protocol
