#include "epifi/provisioner.hpp"

#include <algorithm>

namespace epifi {

GatewayProvisioner::GatewayProvisioner(KeyPair keys, uint8_t id,
                                       LossTable table,
                                       std::set<std::string> expected_sensors,
                                       uint32_t escalation_period)
    : keys_(keys),
      id_(id),
      table_(std::move(table)),
      expected_(std::move(expected_sensors)),
      escalation_period_(escalation_period == 0 ? 1 : escalation_period) {}

std::vector<CovertFrame> GatewayProvisioner::emit_round(
    const Credentials& creds, uint64_t now, RandomSource& rng) {
  const uint64_t seq = std::max(now, last_global_seq_ + 1);
  const SealedMessage sealed = seal(creds, keys_, seq, rng);
  const auto wire = serialize(sealed);

  // Escalation can push m past the packet ceiling for large credentials;
  // fall back to the largest index that still fits.
  std::optional<FecParams> params;
  for (int idx = loss_index_; idx >= 0 && !params; --idx)
    params = fec_params(wire.size(), static_cast<uint8_t>(idx), table_);
  if (!params)
    throw MessageTooLarge("credentials too large for one exchange");

  last_global_seq_ = seq;
  const auto chunks = encode_blocks(wire, *params);

  std::vector<CovertFrame> frames;
  frames.reserve(chunks.size());
  FrameHeader h;
  h.id = id_;
  h.flag = flag_;
  h.fec_index = params->loss_index;
  h.total = static_cast<uint8_t>(params->m);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    h.seq = static_cast<uint8_t>(i);
    frames.push_back(build_frame(pack_header(h), chunks[i]));
  }

  flag_ ^= 1;
  ++rounds_sent_;
  if (rounds_sent_ % escalation_period_ == 0 && loss_index_ < 3) ++loss_index_;
  return frames;
}

ProvisionStatus GatewayProvisioner::note_connected(const std::string& sensor) {
  if (!expected_.contains(sensor))
    throw UnknownSensor("unexpected sensor: " + sensor);
  connected_.insert(sensor);
  return {connected_.size(), expected_.size(), done()};
}

bool GatewayProvisioner::done() const {
  return connected_.size() == expected_.size();
}

const char* to_string(ProvisionEventKind kind) {
  switch (kind) {
    case ProvisionEventKind::ignored: return "ignored";
    case ProvisionEventKind::buffered: return "buffered";
    case ProvisionEventKind::credentials_recovered:
      return "credentials_recovered";
    case ProvisionEventKind::auth_failure: return "auth_failure";
    case ProvisionEventKind::replay_detected: return "replay_detected";
    case ProvisionEventKind::decode_failed: return "decode_failed";
  }
  return "unknown";
}

SensorProvisioner::SensorProvisioner(KeyPair keys, uint8_t id_filter,
                                     LossTable table, ScanPlan scan)
    : keys_(keys),
      id_filter_(id_filter),
      table_(std::move(table)),
      scan_(std::move(scan)) {}

void SensorProvisioner::reset_buffer() {
  buffer_.clear();
  current_flag_.reset();
  current_params_.reset();
}

ProvisionEvent SensorProvisioner::ingest(const CovertFrame& frame) {
  const auto parsed = parse_frame(frame, id_filter_);
  if (!parsed) return {ProvisionEventKind::ignored, 0};
  const auto& [h, chunk] = *parsed;

  const std::pair<uint8_t, uint8_t> params{h.total, h.fec_index};
  if (current_flag_ != std::optional<uint8_t>(h.flag) ||
      current_params_ != std::optional(params)) {
    buffer_.clear();
    current_flag_ = h.flag;
    current_params_ = params;
  }
  buffer_[h.seq] = chunk;

  const uint32_t k = blocks_needed(h.total, h.fec_index, table_);
  if (buffer_.size() < k)
    return {ProvisionEventKind::buffered, buffer_.size()};

  // Enough chunks for a decode attempt; whatever happens, this exchange is
  // consumed and reassembly starts over.
  std::vector<std::pair<uint32_t, PayloadChunk>> blocks;
  blocks.reserve(buffer_.size());
  for (const auto& [seq, c] : buffer_) blocks.emplace_back(seq, c);
  reset_buffer();

  const FecParams p{k, h.total, h.fec_index};
  const auto decoded = decode_blocks(blocks, p);
  if (decoded.status != DecodeStatus::ok)
    return {ProvisionEventKind::decode_failed, 0};
  const auto sealed = deserialize_sealed(decoded.msg);
  if (!sealed) return {ProvisionEventKind::decode_failed, 0};

  const auto result = open(*sealed, keys_, last_seq_);
  switch (result.status) {
    case OpenStatus::auth_failure:
      return {ProvisionEventKind::auth_failure, 0};
    case OpenStatus::replay_detected:
      return {ProvisionEventKind::replay_detected, 0};
    case OpenStatus::malformed_plaintext:
      return {ProvisionEventKind::decode_failed, 0};
    case OpenStatus::ok:
      break;
  }

  last_seq_ = sealed->global_seq;
  if (recovered_) return {ProvisionEventKind::ignored, 0};  // already done
  recovered_ = result.creds;
  return {ProvisionEventKind::credentials_recovered, 0};
}

}  // namespace epifi
