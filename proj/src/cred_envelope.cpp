#include "epifi/cred_envelope.hpp"

#include <algorithm>
#include <cstring>

#include "epifi/reed_solomon.hpp"

namespace epifi {

namespace {

constexpr std::size_t kMaxSsid = 32;
constexpr std::size_t kMaxPassword = 63;
constexpr uint32_t kMaxTotalBlocks = 126;  // total field holds 126 at most

void put_be64(std::vector<uint8_t>& out, uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<uint8_t>(v >> shift));
}

uint64_t get_be64(std::span<const uint8_t> in) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | in[static_cast<size_t>(i)];
  return v;
}

std::vector<uint8_t> mac_input(const SealedMessage& msg) {
  std::vector<uint8_t> data(msg.ciphertext);
  put_be64(data, msg.global_seq);
  return data;
}

}  // namespace

SealedMessage seal(const Credentials& c, const KeyPair& keys,
                   uint64_t now_epoch_seconds, RandomSource& rng) {
  if (c.ssid.empty() || c.ssid.size() > kMaxSsid)
    throw CredentialsTooLong("ssid must be 1..32 bytes");
  if (c.password.size() > kMaxPassword)
    throw CredentialsTooLong("password must be at most 63 bytes");

  std::vector<uint8_t> plaintext;
  plaintext.reserve(2 + c.ssid.size() + c.password.size());
  plaintext.push_back(static_cast<uint8_t>(c.ssid.size()));
  plaintext.insert(plaintext.end(), c.ssid.begin(), c.ssid.end());
  plaintext.push_back(static_cast<uint8_t>(c.password.size()));
  plaintext.insert(plaintext.end(), c.password.begin(), c.password.end());

  SealedMessage msg;
  rng.fill(msg.iv);
  msg.global_seq = now_epoch_seconds;
  msg.ciphertext = aes128_cbc_encrypt(keys.enc_key, msg.iv, plaintext);
  msg.mac = hmac_sha256(keys.mac_key, mac_input(msg));
  return msg;
}

OpenResult open(const SealedMessage& msg, const KeyPair& keys,
                uint64_t last_seq) {
  const auto expected = hmac_sha256(keys.mac_key, mac_input(msg));
  if (!ct_equal(expected, msg.mac)) return {OpenStatus::auth_failure, {}};
  if (msg.global_seq <= last_seq) return {OpenStatus::replay_detected, {}};

  auto plaintext = aes128_cbc_decrypt(keys.enc_key, msg.iv, msg.ciphertext);
  if (!plaintext) return {OpenStatus::malformed_plaintext, {}};

  const auto& pt = *plaintext;
  if (pt.empty()) return {OpenStatus::malformed_plaintext, {}};
  const std::size_t ssid_len = pt[0];
  if (ssid_len == 0 || ssid_len > kMaxSsid || 1 + ssid_len + 1 > pt.size())
    return {OpenStatus::malformed_plaintext, {}};
  const std::size_t pw_len = pt[1 + ssid_len];
  if (pw_len > kMaxPassword || 2 + ssid_len + pw_len != pt.size())
    return {OpenStatus::malformed_plaintext, {}};

  Credentials c;
  c.ssid.assign(pt.begin() + 1, pt.begin() + 1 + static_cast<long>(ssid_len));
  c.password.assign(pt.begin() + 2 + static_cast<long>(ssid_len), pt.end());
  return {OpenStatus::ok, std::move(c)};
}

std::vector<uint8_t> serialize(const SealedMessage& msg) {
  std::vector<uint8_t> wire;
  wire.reserve(16 + 8 + msg.ciphertext.size() + 32);
  wire.insert(wire.end(), msg.iv.begin(), msg.iv.end());
  put_be64(wire, msg.global_seq);
  wire.insert(wire.end(), msg.ciphertext.begin(), msg.ciphertext.end());
  wire.insert(wire.end(), msg.mac.begin(), msg.mac.end());
  return wire;
}

std::optional<SealedMessage> deserialize_sealed(std::span<const uint8_t> wire) {
  constexpr std::size_t kFixed = 16 + 8 + 32;
  if (wire.size() < kFixed + 16) return std::nullopt;
  const std::size_t ct_len = wire.size() - kFixed;
  if (ct_len % 16 != 0) return std::nullopt;

  SealedMessage msg;
  std::copy_n(wire.begin(), 16, msg.iv.begin());
  msg.global_seq = get_be64(wire.subspan(16, 8));
  msg.ciphertext.assign(wire.begin() + 24,
                        wire.begin() + 24 + static_cast<long>(ct_len));
  std::copy_n(wire.end() - 32, 32, msg.mac.begin());
  return msg;
}

std::optional<Fraction> parse_fraction(const std::string& text) {
  std::size_t dot = text.find('.');
  if (dot == std::string::npos) return std::nullopt;
  const std::string whole = text.substr(0, dot);
  const std::string frac = text.substr(dot + 1);
  if (frac.empty() || frac.size() > 6) return std::nullopt;
  if (!whole.empty() && whole != "0") return std::nullopt;
  for (char ch : frac)
    if (ch < '0' || ch > '9') return std::nullopt;

  Fraction f;
  f.den = 1;
  f.num = 0;
  for (char ch : frac) {
    f.num = f.num * 10 + static_cast<uint32_t>(ch - '0');
    f.den *= 10;
  }
  return f;
}

LossTable LossTable::defaults() {
  LossTable t;
  t.values_ = {Fraction{6, 10}, Fraction{7, 10}, Fraction{8, 10},
               Fraction{9, 10}};
  return t;
}

std::optional<LossTable> LossTable::make(
    const std::array<Fraction, 4>& values) {
  for (const auto& f : values) {
    if (f.den == 0 || f.num == 0 || f.num >= f.den) return std::nullopt;
  }
  // strictly increasing: cross-multiply to stay exact
  for (int i = 0; i < 3; ++i) {
    const auto& a = values[static_cast<size_t>(i)];
    const auto& b = values[static_cast<size_t>(i + 1)];
    if (static_cast<uint64_t>(a.num) * b.den >=
        static_cast<uint64_t>(b.num) * a.den)
      return std::nullopt;
  }
  LossTable t;
  t.values_ = values;
  return t;
}

uint32_t blocks_needed(uint32_t m, uint8_t loss_index, const LossTable& table) {
  const Fraction& loss = table.at(loss_index);
  // ceil((1 - num/den) * m) = ceil((den - num) * m / den)
  const uint64_t numer = static_cast<uint64_t>(loss.den - loss.num) * m;
  return static_cast<uint32_t>((numer + loss.den - 1) / loss.den);
}

std::optional<FecParams> fec_params(std::size_t msg_len, uint8_t loss_index,
                                    const LossTable& table) {
  if (msg_len < 1) throw std::invalid_argument("fec_params: empty message");
  for (uint32_t m = 2; m <= kMaxTotalBlocks; m += 2) {
    const uint32_t k = blocks_needed(m, loss_index, table);
    if (static_cast<std::size_t>(k) * kChunkSize >= msg_len + 2)
      return FecParams{k, m, loss_index};
  }
  return std::nullopt;
}

std::vector<PayloadChunk> encode_blocks(std::span<const uint8_t> msg,
                                        const FecParams& p) {
  const std::size_t capacity = static_cast<std::size_t>(p.k) * kChunkSize;
  if (msg.size() + 2 > capacity)
    throw MessageTooLarge("message does not fit k*7 - 2 bytes");

  std::vector<uint8_t> framed(capacity, 0);
  framed[0] = static_cast<uint8_t>(msg.size() >> 8);
  framed[1] = static_cast<uint8_t>(msg.size() & 0xFF);
  std::copy(msg.begin(), msg.end(), framed.begin() + 2);

  const auto blocks = rs::encode(framed, p.k, p.m, kChunkSize);
  std::vector<PayloadChunk> out(p.m);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    std::copy_n(blocks[i].begin(), kChunkSize, out[i].begin());
  return out;
}

DecodeResult decode_blocks(
    const std::vector<std::pair<uint32_t, PayloadChunk>>& blocks,
    const FecParams& p) {
  std::vector<std::pair<std::size_t, std::vector<uint8_t>>> picked;
  picked.reserve(p.k);
  std::vector<bool> seen(p.m, false);
  for (const auto& [idx, chunk] : blocks) {
    if (idx >= p.m)
      throw std::invalid_argument("decode_blocks: index out of range");
    if (seen[idx]) continue;
    seen[idx] = true;
    picked.emplace_back(idx, std::vector<uint8_t>(chunk.begin(), chunk.end()));
    if (picked.size() == p.k) break;
  }
  if (picked.size() < p.k) return {DecodeStatus::insufficient_blocks, {}};

  const auto framed = rs::decode(picked, p.k, p.m, kChunkSize);
  const std::size_t len =
      (static_cast<std::size_t>(framed[0]) << 8) | framed[1];
  if (len == 0 || len > framed.size() - 2)
    return {DecodeStatus::corrupt_length_prefix, {}};

  DecodeResult r;
  r.status = DecodeStatus::ok;
  r.msg.assign(framed.begin() + 2, framed.begin() + 2 + static_cast<long>(len));
  return r;
}

}  // namespace epifi
