#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "epifi/collect_proto.hpp"
#include "epifi/cred_envelope.hpp"
#include "epifi/provisioner.hpp"
#include "epifi/simnet.hpp"

namespace epifi {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GatewayConfig {
  uint64_t pull_interval = 15;
  uint64_t discovery_interval = 300;
  uint32_t want_per_request = 10;
  uint64_t round_cap = 120;
  uint64_t backlog_interval = 60;
  uint64_t upload_interval = 15;
  uint64_t timeout = 2;
  uint32_t retries = 2;
};

struct ProvisioningConfig {
  uint8_t id = 0;
  LossTable table = LossTable::defaults();
  uint32_t escalation_period = 5;
  KeyPair keys;
  Credentials creds;          // the home network being provisioned
  uint64_t round_interval = 5;  // seconds between broadcast rounds
  int gateway_channel = 6;
  ScanPlan scan;              // sensor-side channel schedule
};

struct SensorConfig {
  std::string sensor_id;
  std::vector<std::string> metrics = {"small_particles"};
  uint64_t sample_period = 60;
};

struct SinkConfig {
  std::filesystem::path output = "out";
};

// Everything one deployment needs, the single-file configuration contract:
// no knob lives anywhere but here.
struct DeploymentConfig {
  std::string home_id;
  GatewayConfig gateway;
  std::optional<ProvisioningConfig> provisioning;
  std::vector<SensorConfig> sensors;
  SinkConfig sink;
};

struct ScenarioConfig {
  DeploymentConfig deployment;
  uint64_t duration = 3600;  // virtual seconds
  sim::LossModel loss;       // home-network frame loss
  std::vector<sim::FaultWindow> faults;
  uint64_t seed = 0;
};

// Parses the YAML config, applies defaults, validates invariants. Throws
// ConfigError naming the offending key. EPIFI_SEED in the environment
// overrides the file's seed.
ScenarioConfig load_config(const std::filesystem::path& path);

// Same, from a string (tests and embedded scenarios).
ScenarioConfig parse_config(const std::string& text);

}  // namespace epifi
