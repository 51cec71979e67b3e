#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epifi/covert_frame.hpp"
#include "epifi/crypto.hpp"

namespace epifi {

struct CredentialsTooLong : std::length_error {
  using std::length_error::length_error;
};
struct MessageTooLarge : std::length_error {
  using std::length_error::length_error;
};

// Network name and password being provisioned. Byte strings; ssid 1..32
// bytes, password 0..63 bytes.
struct Credentials {
  std::string ssid;
  std::string password;

  bool operator==(const Credentials&) const = default;
};

// Pre-shared before deployment: one key encrypts, the other authenticates.
struct KeyPair {
  std::array<uint8_t, 16> enc_key{};
  std::array<uint8_t, 32> mac_key{};
};

// The unit that gets erasure-coded and packetized. Wire layout (the exact
// byte string fed to encode_blocks):
//   iv(16) || global_seq(8, big-endian) || ciphertext || mac(32)
struct SealedMessage {
  std::array<uint8_t, 16> iv{};
  uint64_t global_seq = 0;  // epoch seconds, monotone replay floor
  std::vector<uint8_t> ciphertext;  // positive multiple of 16
  std::array<uint8_t, 32> mac{};    // HMAC-SHA256(mac_key, ct || be64(seq))

  bool operator==(const SealedMessage&) const = default;
};

SealedMessage seal(const Credentials& c, const KeyPair& keys,
                   uint64_t now_epoch_seconds, RandomSource& rng);

enum class OpenStatus { ok, auth_failure, replay_detected, malformed_plaintext };

struct OpenResult {
  OpenStatus status = OpenStatus::auth_failure;
  Credentials creds;  // valid only when status == ok
};

// MAC first (constant-time), then the replay floor, then decrypt. The caller
// updates its replay floor to msg.global_seq on success.
OpenResult open(const SealedMessage& msg, const KeyPair& keys,
                uint64_t last_seq);

std::vector<uint8_t> serialize(const SealedMessage& msg);
std::optional<SealedMessage> deserialize_sealed(std::span<const uint8_t> wire);

// Loss fractions are exact rationals so that the encoder and every receiver
// derive the identical k from (m, loss_index); IEEE doubles get
// ceil((1-0.6)*20) wrong.
struct Fraction {
  uint32_t num = 0;
  uint32_t den = 1;

  bool operator==(const Fraction&) const = default;
};

// Parses "0.6", ".75", "0.125" style decimal text. nullopt when malformed.
std::optional<Fraction> parse_fraction(const std::string& text);

// Four tolerated-loss fractions, strictly increasing, each in (0,1),
// addressed by the two-bit fec_index header field.
class LossTable {
 public:
  static LossTable defaults();  // {0.6, 0.7, 0.8, 0.9}
  static std::optional<LossTable> make(const std::array<Fraction, 4>& values);

  const Fraction& at(uint8_t index) const { return values_.at(index); }

  bool operator==(const LossTable&) const = default;

 private:
  std::array<Fraction, 4> values_{};
};

struct FecParams {
  uint32_t k = 0;          // blocks needed to reconstruct
  uint32_t m = 0;          // total blocks, even, k <= m <= 126
  uint8_t loss_index = 0;  // index into the shared table

  bool operator==(const FecParams&) const = default;
};

// k = ceil((1 - loss) * m), the receiver-side derivation.
uint32_t blocks_needed(uint32_t m, uint8_t loss_index, const LossTable& table);

// Smallest even m <= 126 whose k satisfies k*7 >= msg_len + 2 (two bytes
// reserved for the length prefix). nullopt = MessageTooLarge; the caller may
// retry at a lower loss index.
std::optional<FecParams> fec_params(std::size_t msg_len, uint8_t loss_index,
                                    const LossTable& table);

// Frames msg as [len:2 BE][msg][zero pad] to k*7 bytes, splits into k data
// chunks and extends to m chunks; any k of the m reconstruct.
std::vector<PayloadChunk> encode_blocks(std::span<const uint8_t> msg,
                                        const FecParams& p);

enum class DecodeStatus { ok, insufficient_blocks, corrupt_length_prefix };

struct DecodeResult {
  DecodeStatus status = DecodeStatus::insufficient_blocks;
  std::vector<uint8_t> msg;  // valid only when status == ok
};

DecodeResult decode_blocks(
    const std::vector<std::pair<uint32_t, PayloadChunk>>& blocks,
    const FecParams& p);

}  // namespace epifi
