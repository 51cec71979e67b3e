#include "epifi/covert_frame.hpp"

#include <cstdio>

namespace epifi {

std::array<uint8_t, 3> pack_header(const FrameHeader& h) {
  if (h.id > 63) throw InvalidHeader("id out of range");
  if (h.flag > 1) throw InvalidHeader("flag out of range");
  if (h.fec_index > 3) throw InvalidHeader("fec_index out of range");
  if (h.total < 2 || h.total > 126) throw InvalidHeader("total out of range");
  if (h.total % 2 != 0) throw InvalidHeader("total must be even");
  if (h.seq >= h.total) throw InvalidHeader("seq must be < total");

  const uint8_t total_div2 = h.total >> 1;  // 1..63
  std::array<uint8_t, 3> b{};
  b[0] = static_cast<uint8_t>((h.id << 2) | 0b10);
  b[1] = static_cast<uint8_t>((h.flag << 7) | (h.fec_index << 5) |
                              (total_div2 & 0x1F));
  b[2] = static_cast<uint8_t>(((total_div2 >> 5) << 7) | h.seq);
  return b;
}

std::optional<FrameHeader> unpack_header(const std::array<uint8_t, 3>& b) {
  if ((b[0] & 0b11) != 0b10) return std::nullopt;  // NotOurs
  FrameHeader h;
  h.id = b[0] >> 2;
  h.flag = b[1] >> 7;
  h.fec_index = (b[1] >> 5) & 0b11;
  const uint8_t total_div2 =
      static_cast<uint8_t>(((b[2] >> 7) << 5) | (b[1] & 0x1F));
  h.total = static_cast<uint8_t>(total_div2 << 1);
  h.seq = b[2] & 0x7F;
  return h;
}

CovertFrame build_frame(const std::array<uint8_t, 3>& header3,
                        const PayloadChunk& chunk) {
  CovertFrame f;
  f.src = {header3[0], header3[1], header3[2], chunk[0], chunk[1], chunk[2]};
  f.dst = {0x33, 0x33, chunk[3], chunk[4], chunk[5], chunk[6]};
  return f;
}

std::optional<std::pair<FrameHeader, PayloadChunk>> parse_frame(
    const CovertFrame& f, uint8_t expected_id) {
  if (f.dst[0] != 0x33 || f.dst[1] != 0x33) return std::nullopt;
  auto h = unpack_header({f.src[0], f.src[1], f.src[2]});
  if (!h) return std::nullopt;
  if (h->id != expected_id) return std::nullopt;
  // A well-formed exchange never produces these; drop silently.
  if (h->total < 2 || h->seq >= h->total) return std::nullopt;
  PayloadChunk chunk = {f.src[3], f.src[4], f.src[5],
                        f.dst[2], f.dst[3], f.dst[4], f.dst[5]};
  return std::make_pair(*h, chunk);
}

std::string to_debug_string(const CovertFrame& f) {
  char buf[3 * 12 + 2 + 1];
  std::snprintf(buf, sizeof(buf),
                "%02x:%02x:%02x:%02x:%02x:%02x->%02x:%02x:%02x:%02x:%02x:%02x",
                f.src[0], f.src[1], f.src[2], f.src[3], f.src[4], f.src[5],
                f.dst[0], f.dst[1], f.dst[2], f.dst[3], f.dst[4], f.dst[5]);
  return buf;
}

}  // namespace epifi
