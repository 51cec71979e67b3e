#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "epifi/covert_frame.hpp"
#include "epifi/cred_envelope.hpp"

namespace epifi {

struct UnknownSensor : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Round-robin channel schedule for a listener that does not know which
// channel the home AP uses. Deterministic in `now`.
struct ScanPlan {
  std::vector<int> channels = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  uint64_t dwell = 5;  // virtual seconds per channel

  int channel_at(uint64_t now) const {
    return channels[(now / dwell) % channels.size()];
  }
  uint64_t period() const { return dwell * channels.size(); }
};

struct ProvisionStatus {
  std::size_t connected = 0;
  std::size_t expected = 0;
  bool done = false;
};

// Gateway-side broadcaster. Each round seals the credentials afresh (new IV,
// bumped global sequence), packetizes at the current loss index, and toggles
// the send flag. Escalates the loss index every escalation_period rounds,
// up to index 3.
class GatewayProvisioner {
 public:
  GatewayProvisioner(KeyPair keys, uint8_t id, LossTable table,
                     std::set<std::string> expected_sensors,
                     uint32_t escalation_period = 5);

  // Throws MessageTooLarge only if the credentials do not fit even at loss
  // index 0. When escalation pushes m past the 126-packet ceiling, the round
  // goes out at the largest index that still fits.
  std::vector<CovertFrame> emit_round(const Credentials& creds, uint64_t now,
                                      RandomSource& rng);

  ProvisionStatus note_connected(const std::string& sensor);

  bool done() const;
  uint8_t loss_index() const { return loss_index_; }
  uint32_t rounds_sent() const { return rounds_sent_; }
  uint64_t last_global_seq() const { return last_global_seq_; }
  const std::set<std::string>& connected() const { return connected_; }

 private:
  KeyPair keys_;
  uint8_t id_;
  LossTable table_;
  std::set<std::string> expected_;
  std::set<std::string> connected_;
  uint32_t escalation_period_;
  uint8_t loss_index_ = 0;
  uint8_t flag_ = 0;
  uint32_t rounds_sent_ = 0;
  uint64_t last_global_seq_ = 0;
};

enum class ProvisionEventKind {
  ignored,
  buffered,
  credentials_recovered,
  auth_failure,
  replay_detected,
  decode_failed,
};

const char* to_string(ProvisionEventKind kind);

struct ProvisionEvent {
  ProvisionEventKind kind = ProvisionEventKind::ignored;
  std::size_t buffered = 0;  // distinct chunks held, for kind == buffered
};

// Sensor-side listener. Never throws on frame input: a monitor-mode
// listener sees hostile and unrelated traffic constantly, so every outcome
// is an event. The reassembly buffer resets whenever the round flag or FEC
// parameters change and after every decode attempt.
class SensorProvisioner {
 public:
  SensorProvisioner(KeyPair keys, uint8_t id_filter, LossTable table,
                    ScanPlan scan = {});

  int scan_channel(uint64_t now) const { return scan_.channel_at(now); }
  const ScanPlan& scan_plan() const { return scan_; }

  ProvisionEvent ingest(const CovertFrame& frame);

  bool recovered() const { return recovered_.has_value(); }
  const Credentials& credentials() const { return *recovered_; }
  uint64_t last_seq() const { return last_seq_; }

 private:
  void reset_buffer();

  KeyPair keys_;
  uint8_t id_filter_;
  LossTable table_;
  ScanPlan scan_;
  std::optional<uint8_t> current_flag_;
  std::optional<std::pair<uint8_t, uint8_t>> current_params_;  // (total, fec)
  std::map<uint8_t, PayloadChunk> buffer_;
  uint64_t last_seq_ = 0;
  std::optional<Credentials> recovered_;
};

}  // namespace epifi
