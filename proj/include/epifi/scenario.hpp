#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epifi/config.hpp"

namespace epifi {

struct ProvisionOutcome {
  bool recovered = false;
  uint32_t round = 0;      // gateway round count when credentials landed
  uint64_t at = 0;         // virtual seconds
  uint8_t loss_index = 0;  // escalation level that finally got through
};

struct MetricsRow {
  uint64_t t = 0;
  std::vector<uint64_t> sensor_queues;  // config order
  uint64_t gateway_queue = 0;
  uint64_t sink_count = 0;
  uint64_t generated_total = 0;
};

// Depth after a change, keyed by the instant it changed. Finer-grained than
// the minute rows; peak and drain assertions use this.
using DepthTrace = std::vector<std::pair<uint64_t, uint64_t>>;

struct MetricsReport {
  std::string home_id;
  std::vector<std::string> sensor_ids;
  std::vector<MetricsRow> rows;
  std::vector<std::string> events;

  std::map<std::string, ProvisionOutcome> provisioning;

  std::map<std::string, DepthTrace> sensor_depth;
  DepthTrace gateway_depth;

  // Final contents: what the deployment measured and what the sink holds.
  std::map<DedupSink::Key, double> generated_entries;
  std::map<DedupSink::Key, double> sink_entries;

  uint64_t generated_total = 0;
  uint64_t sink_unique = 0;
  uint64_t duplicates_detected = 0;
  uint64_t dropped_before_push = 0;

  bool conservation_ok = true;
  std::string conservation_error;
  bool exactly_once = false;

  uint64_t peak(const DepthTrace& trace, uint64_t from = 0,
                uint64_t to = UINT64_MAX) const;
  std::optional<uint64_t> first_zero_at_or_after(const DepthTrace& trace,
                                                 uint64_t t) const;
};

enum class RunMode { full, provision_only };

// Deterministic end-to-end run: identical (config, seed) produce
// byte-identical outputs. work_dir receives the durable queue files and is
// wiped first; a run is always a fresh deployment.
MetricsReport run_scenario(const ScenarioConfig& cfg,
                           const std::filesystem::path& work_dir,
                           RunMode mode = RunMode::full);

// metrics.csv, sink.csv, generated.csv, events.log under out_dir.
void write_outputs(const MetricsReport& report,
                   const std::filesystem::path& out_dir);

// Pure re-check over the written report files; never re-runs anything.
// Returns human-readable violations, empty when everything holds.
std::vector<std::string> verify_outputs(const std::filesystem::path& out_dir);

}  // namespace epifi
