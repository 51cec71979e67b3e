#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epifi::sim {

struct PastEvent : std::logic_error {
  using std::logic_error::logic_error;
};
struct UnknownNode : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Discrete-event clock over unsigned virtual seconds. Same-time events fire
// in insertion order within a tier; the metrics tier (kTierSample) runs
// before ordinary events at the same instant so queue-depth reads are
// phase-stable.
inline constexpr int kTierSample = 0;
inline constexpr int kTierNormal = 1;

class Simulator {
 public:
  uint64_t now() const { return now_; }

  void schedule(uint64_t at, std::function<void()> fn,
                int tier = kTierNormal);

  // Runs events with time <= end, then advances the clock to end.
  void run_until(uint64_t end);

  // Runs everything that is queued.
  void run_all();

 private:
  struct Ev {
    uint64_t t;
    int tier;
    uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Ev& a, const Ev& b) const {
      if (a.t != b.t) return a.t > b.t;
      if (a.tier != b.tier) return a.tier > b.tier;
      return a.seq > b.seq;
    }
  };

  uint64_t now_ = 0;
  uint64_t next_seq_ = 0;
  std::priority_queue<Ev, std::vector<Ev>, Later> queue_;
};

// Deterministic unit-interval stream; identical seeds give identical draws
// on every platform (no implementation-defined distributions involved).
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  double next_unit();  // [0, 1)
  bool chance(double p) { return next_unit() < p; }
  void fill(std::span<uint8_t> out);

 private:
  uint64_t state_;
};

// Derives a child seed so each channel/listener gets an independent stream.
uint64_t derive_seed(uint64_t seed, std::string_view label);

// Bernoulli frame loss. The paper's measured loss rates ship as presets
// named "table-loss/loc<1..3>/<close|medium|far>" and
// "pi-vs-bbb/<pi|bbb>/<close|medium|far>". `until` bounds the lossy phase
// (0 = the whole run): exact delivery guarantees need at least one clean
// window to drain into.
struct LossModel {
  double p = 0.0;
  uint64_t seed = 0;
  uint64_t until = 0;

  double p_at(uint64_t now) const {
    return (until != 0 && now >= until) ? 0.0 : p;
  }

  static std::optional<double> preset(const std::string& name);
  static const std::vector<std::pair<std::string, double>>& presets();
};

enum class FaultKind { power_loss, net_disconnect, internet_disconnect };

const char* to_string(FaultKind kind);
std::optional<FaultKind> fault_kind_from(const std::string& name);

struct FaultWindow {
  std::string target;  // node name; "gateway" or a sensor_id
  FaultKind kind = FaultKind::net_disconnect;
  uint64_t start = 0;
  uint64_t end = 0;  // exclusive; start < end
};

}  // namespace epifi::sim
