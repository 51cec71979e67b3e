#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace epifi {

// Provisioning frames smuggle data through the only cleartext fields an
// unassociated monitor-mode listener can read: the Ethernet source and
// destination addresses. The first three source-address bytes carry a
// 24-bit header, the remaining seven bytes carry payload.

struct InvalidHeader : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct FrameHeader {
  uint8_t id = 0;         // 0..63, deployment-unique gateway/sensor pairing id
  uint8_t flag = 0;       // round parity, toggled per exchange
  uint8_t fec_index = 0;  // 0..3, index into the shared loss table
  uint8_t total = 0;      // total packets in the exchange, even, 2..126
  uint8_t seq = 0;        // packet index within the exchange, < total

  bool operator==(const FrameHeader&) const = default;
};

inline constexpr std::size_t kChunkSize = 7;
using PayloadChunk = std::array<uint8_t, kChunkSize>;

struct CovertFrame {
  std::array<uint8_t, 6> src{};
  std::array<uint8_t, 6> dst{};

  bool operator==(const CovertFrame&) const = default;
};

// Header layout, 24 bits:
//   byte0: id in the six high bits, then 10 (locally administered, unicast)
//   byte1: flag, fec_index (2 bits), low five bits of total/2
//   byte2: sixth bit of total/2, then seq (7 bits)
// total is stored divided by two; the encoder only ever produces even totals.
std::array<uint8_t, 3> pack_header(const FrameHeader& h);

// Decodes the raw fields. Returns nullopt (NotOurs) when the address-flag
// bits mark the frame as not produced by this protocol. No range checks
// beyond that; parse_frame applies them.
std::optional<FrameHeader> unpack_header(const std::array<uint8_t, 3>& b);

// src = header ++ chunk[0..3), dst = 33:33 ++ chunk[3..7).
CovertFrame build_frame(const std::array<uint8_t, 3>& header3,
                        const PayloadChunk& chunk);

// Silent filter: nullopt when the frame is not ours (address shape, id
// mismatch, or fields a well-formed exchange cannot produce). Listeners in
// monitor mode see unrelated traffic constantly; this is not an error.
std::optional<std::pair<FrameHeader, PayloadChunk>> parse_frame(
    const CovertFrame& f, uint8_t expected_id);

// "aa:bb:cc:dd:ee:ff->33:33:..." lowercase hex, for logs.
std::string to_debug_string(const CovertFrame& f);

}  // namespace epifi
