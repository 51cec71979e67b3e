#include "epifi/simnet.hpp"

namespace epifi::sim {

void Simulator::schedule(uint64_t at, std::function<void()> fn, int tier) {
  if (at < now_) throw PastEvent("event scheduled in the past");
  queue_.push(Ev{at, tier, next_seq_++, std::move(fn)});
}

void Simulator::run_until(uint64_t end) {
  while (!queue_.empty() && queue_.top().t <= end) {
    Ev ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.fn();
  }
  now_ = end;
}

void Simulator::run_all() {
  while (!queue_.empty()) {
    Ev ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ev.fn();
  }
}

namespace {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

void Rng::fill(std::span<uint8_t> out) {
  for (auto& b : out) b = static_cast<uint8_t>(next_u64() >> 32);
}

uint64_t derive_seed(uint64_t seed, std::string_view label) {
  uint64_t state = seed ^ fnv1a(label);
  return splitmix64(state);
}

const std::vector<std::pair<std::string, double>>& LossModel::presets() {
  static const std::vector<std::pair<std::string, double>> table = {
      {"table-loss/loc1/close", 0.37},  {"table-loss/loc1/medium", 0.70},
      {"table-loss/loc1/far", 0.93},    {"table-loss/loc2/close", 0.54},
      {"table-loss/loc2/medium", 0.36}, {"table-loss/loc2/far", 0.99},
      {"table-loss/loc3/close", 0.90},  {"table-loss/loc3/medium", 0.99},
      {"table-loss/loc3/far", 1.00},    {"pi-vs-bbb/bbb/close", 0.37},
      {"pi-vs-bbb/bbb/medium", 0.70},   {"pi-vs-bbb/bbb/far", 0.93},
      {"pi-vs-bbb/pi/close", 0.018},    {"pi-vs-bbb/pi/medium", 0.108},
      {"pi-vs-bbb/pi/far", 0.079},
  };
  return table;
}

std::optional<double> LossModel::preset(const std::string& name) {
  for (const auto& [key, p] : presets())
    if (key == name) return p;
  return std::nullopt;
}

const char* to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::power_loss: return "power_loss";
    case FaultKind::net_disconnect: return "net_disconnect";
    case FaultKind::internet_disconnect: return "internet_disconnect";
  }
  return "unknown";
}

std::optional<FaultKind> fault_kind_from(const std::string& name) {
  if (name == "power_loss") return FaultKind::power_loss;
  if (name == "net_disconnect") return FaultKind::net_disconnect;
  if (name == "internet_disconnect") return FaultKind::internet_disconnect;
  return std::nullopt;
}

}  // namespace epifi::sim
