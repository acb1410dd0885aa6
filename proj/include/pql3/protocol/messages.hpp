#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pql3/fhe/lwe.hpp"

namespace pql3::protocol {

// Payload of a CiphertextBatch frame: the encrypted input codes of one plan
// segment, in segment input order.
struct BatchRequest {
  std::uint64_t segment = 0;
  bool reset = false;  // drop the session's cached keys and values first
  std::vector<fhe::LweCiphertext> inputs;

  Bytes serialize() const;
  static BatchRequest deserialize(std::span<const std::uint8_t> payload, fhe::ParamsPtr params, fhe::u64 key_id);
};

// Payload of a Result frame. An acknowledgement of an installed key or plan
// is a Result with kind Ack and the digest of what was installed.
struct ResultMsg {
  enum class Kind : std::uint8_t { Ack = 0, Outputs = 1 };
  Kind kind = Kind::Outputs;
  std::array<std::uint8_t, 32> digest{};  // Ack only
  std::uint64_t segment = 0;
  std::uint64_t pbs = 0;      // bootstraps executed for this request
  double wall_seconds = 0.0;  // server time spent executing
  std::vector<fhe::LweCiphertext> outputs;

  Bytes serialize() const;
  static ResultMsg deserialize(std::span<const std::uint8_t> payload, fhe::ParamsPtr params, fhe::u64 key_id);
};

struct ErrorMsg {
  std::string message;
  Bytes serialize() const;
  static ErrorMsg deserialize(std::span<const std::uint8_t> payload);
};

Bytes encode_error(const std::string& message);

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes);

}  // namespace pql3::protocol
