#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epifi {

// One timestamped sensor measurement. The timestamp is recorded when the
// measurement is made and travels with the value end to end, so samples from
// one physical reading stay aligned no matter when they are collected.
struct DataSample {
  std::string sensor_id;
  std::string metric;
  double value = 0.0;
  uint64_t measured_at = 0;  // epoch seconds

  bool operator==(const DataSample&) const = default;
};

// sensor_id \x1f metric \x1f value \x1f measured_at, UTF-8. The value uses
// shortest round-trip formatting so the payload is both human-readable and
// bit-exact.
std::vector<uint8_t> to_payload(const DataSample& s);
std::optional<DataSample> from_payload(std::span<const uint8_t> payload);

struct CorruptLog : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AckOverrun : std::logic_error {
  using std::logic_error::logic_error;
};

// Crash-safe FIFO with peek / acknowledge-delete semantics. Reads never
// consume; records disappear only when the consumer acknowledges them after
// it has made them durable downstream.
//
// On disk: an append-only log
//     "EPQ1" || base_offset(8 BE) || ([len:4 BE][crc32:4 BE][payload])*
// plus a head sidecar "<log>.head" holding head_offset(8 BE) || crc32(4 BE),
// rewritten atomically (write temp, rename) on ack. Every push is flushed
// and fsynced before it returns.
//
// One writer and one reader/acker may operate concurrently; the queue
// serializes internally. Two processes sharing one log is unsupported.
class DurableQueue {
 public:
  struct Options {
    // Acked prefix bytes that trigger a compacting rewrite.
    std::size_t compact_threshold = 1 << 20;
  };

  // Scans the log, drops any torn tail record, restores head from the
  // sidecar. Creates both files when the path is fresh. Throws CorruptLog
  // only when the sidecar is unreadable or inconsistent with the log.
  static DurableQueue recover(const std::filesystem::path& log_path,
                              Options opts);
  static DurableQueue recover(const std::filesystem::path& log_path);

  DurableQueue(DurableQueue&&) noexcept;
  DurableQueue& operator=(DurableQueue&&) noexcept;
  ~DurableQueue();

  // Returns the record's offset, or nullopt on storage failure (nothing
  // stored; the caller retries).
  std::optional<uint64_t> push(const DataSample& sample);

  // Up to n oldest unacked records, offset order. Non-destructive.
  std::vector<std::pair<uint64_t, DataSample>> peek(std::size_t n) const;

  // Durably advances head by n. ack(0) is a no-op. Throws AckOverrun when
  // n exceeds len() — a protocol bug, not a recoverable condition.
  void ack(uint64_t n);

  uint64_t len() const;
  uint64_t head() const;
  uint64_t tail() const;

  const std::filesystem::path& log_path() const { return log_path_; }

  // Test seam: return true to make the next append fail like a full disk.
  void set_write_fault_hook(std::function<bool()> hook);

 private:
  DurableQueue() = default;
  void append_record(std::span<const uint8_t> payload);
  void write_head_sidecar(uint64_t head) const;
  void compact();

  std::filesystem::path log_path_;
  Options opts_;
  int fd_ = -1;
  uint64_t base_ = 0;  // offset of the first record in the log file
  uint64_t head_ = 0;
  uint64_t tail_ = 0;
  std::deque<DataSample> records_;        // [head_, tail_), mirrors the log
  std::deque<std::size_t> record_bytes_;  // on-disk size of [base_, tail_)
  std::function<bool()> write_fault_;
  mutable std::mutex mu_;
};

}  // namespace epifi
