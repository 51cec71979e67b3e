#include "epifi/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdlib>
#include <iostream>
#include <set>

namespace epifi {

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& why) {
  throw ConfigError("config error at '" + key + "': " + why);
}

uint64_t get_u64(const YAML::Node& node, const std::string& key,
                 uint64_t fallback, bool positive = true) {
  if (!node || !node[key]) return fallback;
  uint64_t v;
  try {
    v = node[key].as<uint64_t>();
  } catch (const YAML::Exception&) {
    fail(key, "expected a non-negative integer");
  }
  if (positive && v == 0) fail(key, "must be greater than zero");
  return v;
}

std::vector<uint8_t> parse_hex(const std::string& text, const std::string& key,
                               std::size_t expected_len) {
  if (text.size() != expected_len * 2) fail(key, "wrong hex length");
  std::vector<uint8_t> out(expected_len);
  for (std::size_t i = 0; i < expected_len; ++i) {
    auto nibble = [&](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      fail(key, "not valid hex");
    };
    out[i] = static_cast<uint8_t>((nibble(text[2 * i]) << 4) |
                                  nibble(text[2 * i + 1]));
  }
  return out;
}

LossTable parse_loss_table(const YAML::Node& node) {
  if (!node.IsSequence() || node.size() != 4)
    fail("loss_table", "expected four increasing fractions");
  std::array<Fraction, 4> values;
  for (std::size_t i = 0; i < 4; ++i) {
    auto f = parse_fraction(node[i].as<std::string>());
    if (!f) fail("loss_table", "entries must be decimals in (0,1)");
    values[i] = *f;
  }
  auto table = LossTable::make(values);
  if (!table) fail("loss_table", "must be strictly increasing in (0,1)");
  return *table;
}

ProvisioningConfig parse_provisioning(const YAML::Node& node,
                                      const std::string& home_id) {
  ProvisioningConfig p;
  const uint64_t id = get_u64(node, "id", 0, false);
  if (id > 63) fail("provisioning.id", "must be 0..63");
  p.id = static_cast<uint8_t>(id);

  if (node["loss_table"]) p.table = parse_loss_table(node["loss_table"]);
  p.escalation_period = static_cast<uint32_t>(
      get_u64(node, "escalation_period", p.escalation_period));
  p.round_interval = get_u64(node, "round_interval", p.round_interval);

  if (!node["enc_key"]) fail("provisioning.enc_key", "required");
  if (!node["mac_key"]) fail("provisioning.mac_key", "required");
  const auto enc = parse_hex(node["enc_key"].as<std::string>(),
                             "provisioning.enc_key", 16);
  const auto mac = parse_hex(node["mac_key"].as<std::string>(),
                             "provisioning.mac_key", 32);
  std::copy(enc.begin(), enc.end(), p.keys.enc_key.begin());
  std::copy(mac.begin(), mac.end(), p.keys.mac_key.begin());

  p.creds.ssid = node["ssid"] ? node["ssid"].as<std::string>() : home_id;
  p.creds.password =
      node["password"] ? node["password"].as<std::string>() : std::string{};
  if (p.creds.ssid.empty() || p.creds.ssid.size() > 32)
    fail("provisioning.ssid", "must be 1..32 bytes");
  if (p.creds.password.size() > 63)
    fail("provisioning.password", "must be at most 63 bytes");

  const uint64_t channel = get_u64(node, "channel", 6);
  if (channel < 1 || channel > 11) fail("provisioning.channel", "must be 1..11");
  p.gateway_channel = static_cast<int>(channel);

  p.scan.dwell = get_u64(node, "dwell", p.scan.dwell);
  if (node["scan_channels"]) {
    const auto& seq = node["scan_channels"];
    if (!seq.IsSequence() || seq.size() == 0)
      fail("provisioning.scan_channels", "expected a non-empty list");
    p.scan.channels.clear();
    for (const auto& c : seq) {
      const int ch = c.as<int>();
      if (ch < 1 || ch > 11)
        fail("provisioning.scan_channels", "channels must be 1..11");
      p.scan.channels.push_back(ch);
    }
  }
  return p;
}

sim::LossModel parse_loss(const YAML::Node& root, uint64_t seed) {
  sim::LossModel model;
  model.seed = seed;
  model.until = get_u64(root, "loss_until", 0, false);
  const YAML::Node node = root["loss"];
  if (!node) return model;
  const auto text = node.as<std::string>();
  if (auto p = sim::LossModel::preset(text)) {
    model.p = *p;
    return model;
  }
  try {
    model.p = node.as<double>();
  } catch (const YAML::Exception&) {
    fail("loss", "expected a probability or a known preset name");
  }
  if (model.p < 0.0 || model.p > 1.0) fail("loss", "must be within [0,1]");
  return model;
}

void warn_ignored(const YAML::Node& node, const std::string& where) {
  // Hostname/password belong to OS imaging, which this artifact does not
  // model; accept them so real device-init files load, but say so.
  for (const char* key : {"hostname", "password"}) {
    if (node[key])
      std::cerr << "warning: ignoring '" << key << "' under '" << where
                << "' (host imaging is not simulated)\n";
  }
}

ScenarioConfig parse_root(const YAML::Node& root) {
  ScenarioConfig cfg;

  if (!root["home_id"]) fail("home_id", "required");
  cfg.deployment.home_id = root["home_id"].as<std::string>();
  if (cfg.deployment.home_id.empty()) fail("home_id", "must be non-empty");

  cfg.duration = get_u64(root, "duration", cfg.duration);
  cfg.seed = get_u64(root, "seed", cfg.seed, false);
  if (const char* env = std::getenv("EPIFI_SEED")) {
    try {
      cfg.seed = std::stoull(env);
    } catch (...) {
      fail("EPIFI_SEED", "must be an unsigned integer");
    }
  }

  const YAML::Node gw = root["gateway"];
  GatewayConfig& g = cfg.deployment.gateway;
  g.pull_interval = get_u64(gw, "pull_interval", g.pull_interval);
  g.discovery_interval = get_u64(gw, "discovery_interval", g.discovery_interval);
  g.want_per_request = static_cast<uint32_t>(
      get_u64(gw, "want_per_request", g.want_per_request));
  g.round_cap = get_u64(gw, "round_cap", g.round_cap);
  g.backlog_interval = get_u64(gw, "backlog_interval", g.backlog_interval);
  g.upload_interval = get_u64(gw, "upload_interval", g.upload_interval);
  g.timeout = get_u64(gw, "timeout", g.timeout);
  g.retries = static_cast<uint32_t>(get_u64(gw, "retries", g.retries, false));
  if (gw) warn_ignored(gw, "gateway");

  if (root["sensors"] && !root["sensors"].IsSequence())
    fail("sensors", "expected a list");
  std::set<std::string> ids;
  for (const auto& s : root["sensors"]) {
    SensorConfig sc;
    if (!s["sensor_id"]) fail("sensors.sensor_id", "required");
    sc.sensor_id = s["sensor_id"].as<std::string>();
    if (sc.sensor_id.empty()) fail("sensors.sensor_id", "must be non-empty");
    if (sc.sensor_id == "gateway" || sc.sensor_id == "sink")
      fail("sensors.sensor_id", "reserved node name");
    if (!ids.insert(sc.sensor_id).second)
      fail("sensors.sensor_id", "duplicate id '" + sc.sensor_id + "'");
    if (s["metrics"]) {
      if (!s["metrics"].IsSequence() || s["metrics"].size() == 0)
        fail("sensors.metrics", "expected a non-empty list");
      sc.metrics.clear();
      for (const auto& m : s["metrics"]) {
        sc.metrics.push_back(m.as<std::string>());
        if (sc.metrics.back().empty())
          fail("sensors.metrics", "metric names must be non-empty");
      }
    }
    sc.sample_period = get_u64(s, "sample_period_seconds", sc.sample_period);
    warn_ignored(s, "sensors");
    cfg.deployment.sensors.push_back(std::move(sc));
  }

  if (root["provisioning"])
    cfg.deployment.provisioning =
        parse_provisioning(root["provisioning"], cfg.deployment.home_id);

  if (root["sink"] && root["sink"]["output"])
    cfg.deployment.sink.output = root["sink"]["output"].as<std::string>();

  cfg.loss = parse_loss(root, cfg.seed);

  if (root["faults"]) {
    if (!root["faults"].IsSequence()) fail("faults", "expected a list");
    for (const auto& f : root["faults"]) {
      sim::FaultWindow w;
      if (!f["target"]) fail("faults.target", "required");
      w.target = f["target"].as<std::string>();
      if (w.target != "gateway" && !ids.contains(w.target))
        fail("faults.target", "unknown node '" + w.target + "'");
      if (!f["kind"]) fail("faults.kind", "required");
      auto kind = sim::fault_kind_from(f["kind"].as<std::string>());
      if (!kind)
        fail("faults.kind",
             "expected power_loss, net_disconnect or internet_disconnect");
      w.kind = *kind;
      if (w.kind == sim::FaultKind::internet_disconnect &&
          w.target != "gateway")
        fail("faults.target", "internet_disconnect applies to the gateway");
      w.start = get_u64(f, "start", 0, false);
      w.end = get_u64(f, "end", 0, false);
      if (w.start >= w.end) fail("faults", "start must be before end");
      if (w.end > cfg.duration) fail("faults", "window exceeds duration");
      cfg.faults.push_back(std::move(w));
    }
  }

  return cfg;
}

}  // namespace

ScenarioConfig load_config(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config file: " + path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_root(root);
}

ScenarioConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_root(root);
}

}  // namespace epifi
