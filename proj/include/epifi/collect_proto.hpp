#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "epifi/durable_queue.hpp"

namespace epifi {

// Capability descriptor a sensor returns to a discovery probe, in the
// spirit of a .well-known/core link-format listing.
struct SensorDescriptor {
  std::string sensor_id;
  std::string address;                // simnet endpoint name
  std::vector<std::string> resources; // metric names

  bool operator==(const SensorDescriptor&) const = default;
};

struct PullRequest {
  uint32_t want = 1;  // data points requested
  uint32_t ack = 0;   // data points confirmed from the previous response
};

struct PullResponse {
  enum class Status { ok, ack_overrun };
  Status status = Status::ok;
  std::vector<DataSample> samples;  // oldest first, at most `want`
  uint64_t remaining = 0;           // queue depth left behind, informational
};

// Sensor-side responder. Applies the piggybacked ack to the queue, then
// serves the next batch without deleting it; deletion only ever happens via
// a later ack. The previous response size bounds the acceptable ack; a
// fresh (or restarted) responder accepts only ack=0.
class SensorDataService {
 public:
  explicit SensorDataService(DurableQueue& queue) : queue_(queue) {}

  PullResponse handle_pull(const PullRequest& req);

 private:
  DurableQueue& queue_;
  uint64_t last_response_count_ = 0;
};

struct SchedulerConfig {
  uint32_t want_per_request = 10;
  uint64_t round_cap = 120;      // samples per sensor per visit
  uint64_t pull_interval = 15;   // seconds between idle-state pulls
  uint64_t backlog_interval = 60;  // pacing while a sensor drains a backlog
  uint64_t timeout = 2;          // seconds before a retry
  uint32_t retries = 2;          // resends before giving up on a round
};

// Round-robin pull scheduler with a per-visit fairness cap. Pure state
// machine: the caller moves messages and reports outcomes back.
//
// Ack discipline: a batch is acknowledged only in the immediately following
// request, and only when the previous exchange finished cleanly. Any
// uncertainty (timeout, storage failure, overrun reply) resets the pending
// ack to zero — duplicates are acceptable, silent deletion of unstored
// samples is not.
class PollScheduler {
 public:
  explicit PollScheduler(SchedulerConfig cfg = {}) : cfg_(cfg) {}

  // Discovery results merge into the ring without disturbing the order of
  // sensors already present.
  void merge_discovered(const std::vector<SensorDescriptor>& found);

  bool has_targets() const { return !ring_.empty(); }
  const std::vector<SensorDescriptor>& ring() const { return ring_; }

  // The sensor the next pull goes to.
  const SensorDescriptor& current() const;

  // Builds the next request, consuming the pending ack: exactly one request
  // instance ever carries a given batch's acknowledgment. A retry after a
  // lost response must not re-ack, or the sensor would delete samples the
  // gateway never stored.
  PullRequest take_request();

  enum class Advance {
    stay_backlog,   // full response below the cap: keep draining this sensor
    next_partial,   // short response: sensor is drained, move on
    next_cap,       // fairness cap reached, move on
    next_timeout,   // unreachable, move on
    next_error,     // overrun or storage failure, ack reset, move on
  };

  // stored_count: how many of the batch's samples (a prefix) were durably
  // written on the gateway side. Only that prefix may be acknowledged; a
  // short count marks the exchange dirty and resets pacing.
  Advance on_response(const PullResponse& resp, std::size_t stored_count);
  Advance on_give_up();  // timeout after retries

  // Seconds until the next pull after the given outcome.
  uint64_t delay_after(Advance a) const;

  const SchedulerConfig& config() const { return cfg_; }

 private:
  void advance_ring();

  SchedulerConfig cfg_;
  std::vector<SensorDescriptor> ring_;
  std::size_t current_ = 0;
  uint64_t session_pulled_ = 0;
  std::map<std::string, uint32_t> pending_ack_;
};

// Idempotent keyed store standing in for the time-series database.
// Re-inserting an existing key changes nothing; at-least-once delivery plus
// this dedup is what turns retries into exactly-once.
class DedupSink {
 public:
  // (sensor_id, metric, measured_at); home_id scopes the whole store.
  using Key = std::tuple<std::string, std::string, uint64_t>;

  explicit DedupSink(std::string home_id) : home_id_(std::move(home_id)) {}

  struct WriteResult {
    std::size_t stored = 0;
    std::size_t duplicates = 0;
  };

  // nullopt on (injected) sink failure; nothing from the batch is kept.
  std::optional<WriteResult> write(std::span<const DataSample> samples);

  std::size_t unique_count() const { return store_.size(); }
  bool contains(const DataSample& s) const;
  const std::map<Key, double>& entries() const { return store_; }
  const std::string& home_id() const { return home_id_; }

  // CSV columns home_id,sensor_id,metric,measured_at,value sorted by
  // (sensor_id, metric, measured_at).
  void export_csv(std::ostream& out) const;

  // Test seam: return true to fail the next write.
  void set_fault_hook(std::function<bool()> hook) { fault_ = std::move(hook); }

 private:
  std::string home_id_;
  std::map<Key, double> store_;
  std::function<bool()> fault_;
};

}  // namespace epifi
