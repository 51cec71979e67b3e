#include "epifi/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

namespace epifi {

namespace fs = std::filesystem;

namespace {

using Key = DedupSink::Key;

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Synthetic measurement: deterministic, exact in binary (quarter steps), and
// distinct enough across sensors/metrics to catch crossed wires.
double synth_value(const std::string& sensor_id, const std::string& metric,
                   uint64_t t) {
  const double base =
      static_cast<double>(fnv1a(sensor_id + "/" + metric) % 200);
  return base + 0.25 * static_cast<double>((t / 60) % 48);
}

std::string format_value(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return {buf, end};
}

// Wraps the simulator's stream as the crypto-facing RandomSource.
struct RngSource final : RandomSource {
  explicit RngSource(sim::Rng& rng) : rng(rng) {}
  void fill(std::span<uint8_t> out) override { rng.fill(out); }
  sim::Rng& rng;
};

struct SensorNode {
  SensorConfig cfg;
  bool powered = true;
  bool connected = false;  // provisioned into the home network; durable
  bool net_down = false;
  std::optional<DurableQueue> queue;
  std::optional<SensorDataService> service;
  std::optional<SensorProvisioner> prov;
  std::deque<Key> mirror;  // shadow of the on-disk queue, for accounting
  bool notify_pending = false;
  sim::Rng covert_rng{0};
  sim::Rng net_rng{0};
};

struct GatewayNode {
  bool powered = true;
  bool net_down = false;
  std::optional<DurableQueue> queue;
  std::deque<Key> mirror;
  std::optional<GatewayProvisioner> prov;
  std::optional<PollScheduler> sched;
  // in-flight pull attempt
  uint64_t poll_token = 0;
  PullRequest cur_req;
  uint32_t attempt = 0;
};

class Runner {
 public:
  Runner(const ScenarioConfig& cfg, fs::path work_dir, RunMode mode)
      : cfg_(cfg),
        work_(std::move(work_dir)),
        mode_(mode),
        sink_(cfg.deployment.home_id),
        seal_rng_(sim::derive_seed(cfg.seed, "seal")) {}

  MetricsReport run();

 private:
  const SchedulerConfig scheduler_config() const {
    const GatewayConfig& g = cfg_.deployment.gateway;
    return SchedulerConfig{g.want_per_request, g.round_cap, g.pull_interval,
                           g.backlog_interval, g.timeout, g.retries};
  }

  bool home_path_ok(const SensorNode& s) const {
    return gw_.powered && s.powered && !gw_.net_down && !s.net_down;
  }
  bool internet_ok() const { return gw_.powered && !inet_down_; }

  void log(const std::string& line) { report_.events.push_back(line); }
  std::string ts() const { return "ts=" + std::to_string(sim_.now()); }

  void trace_sensor_depth(std::size_t i) {
    report_.sensor_depth[sensors_[i].cfg.sensor_id].emplace_back(
        sim_.now(), sensors_[i].mirror.size());
  }
  void trace_gateway_depth() {
    report_.gateway_depth.emplace_back(sim_.now(), gw_.mirror.size());
  }

  void setup();
  void apply_fault_start(const sim::FaultWindow& w);
  void apply_fault_end(const sim::FaultWindow& w);
  void sensor_power_up(std::size_t i);
  void gateway_power_up();

  void sample_tick(std::size_t i);
  void provision_round_tick();
  void notify_tick(std::size_t i);
  void discovery_probe();
  void discovery_tick();
  void poll_tick(uint64_t token);
  void poll_attempt(uint64_t token);
  void finish_poll(uint64_t token, PollScheduler::Advance advance);
  void upload_tick();
  void metrics_tick();
  void finalize();

  std::size_t sensor_index(const std::string& id) const;

  ScenarioConfig cfg_;
  fs::path work_;
  RunMode mode_;
  sim::Simulator sim_;
  MetricsReport report_;
  std::vector<SensorNode> sensors_;
  GatewayNode gw_;
  DedupSink sink_;
  std::map<Key, double> generated_;
  bool prov_done_ = false;
  bool inet_down_ = false;
  sim::Rng seal_rng_;
};

std::size_t Runner::sensor_index(const std::string& id) const {
  for (std::size_t i = 0; i < sensors_.size(); ++i)
    if (sensors_[i].cfg.sensor_id == id) return i;
  throw sim::UnknownNode("unknown sensor: " + id);
}

void Runner::setup() {
  std::error_code ec;
  fs::remove_all(work_, ec);
  fs::create_directories(work_);

  const bool provisioning = cfg_.deployment.provisioning.has_value();
  sensors_.reserve(cfg_.deployment.sensors.size());
  for (const auto& sc : cfg_.deployment.sensors) {
    SensorNode node;
    node.cfg = sc;
    node.connected = !provisioning;
    node.queue.emplace(
        DurableQueue::recover(work_ / (sc.sensor_id + ".queue")));
    node.service.emplace(*node.queue);
    if (provisioning) {
      const auto& p = *cfg_.deployment.provisioning;
      node.prov.emplace(p.keys, p.id, p.table, p.scan);
    }
    node.covert_rng = sim::Rng(
        sim::derive_seed(cfg_.seed, "covert/" + sc.sensor_id));
    node.net_rng =
        sim::Rng(sim::derive_seed(cfg_.seed, "home/" + sc.sensor_id));
    report_.sensor_ids.push_back(sc.sensor_id);
    report_.sensor_depth[sc.sensor_id] = {};
    sensors_.push_back(std::move(node));
  }

  gw_.queue.emplace(DurableQueue::recover(work_ / "gateway.queue"));
  gw_.sched.emplace(scheduler_config());
  if (provisioning) {
    const auto& p = *cfg_.deployment.provisioning;
    std::set<std::string> expected;
    for (const auto& sc : cfg_.deployment.sensors)
      expected.insert(sc.sensor_id);
    gw_.prov.emplace(p.keys, p.id, p.table, expected, p.escalation_period);
  }

  for (const auto& w : cfg_.faults) {
    if (w.target != "gateway") sensor_index(w.target);  // validates
    sim_.schedule(w.start, [this, w] { apply_fault_start(w); },
                  sim::kTierSample);
    sim_.schedule(w.end, [this, w] { apply_fault_end(w); }, sim::kTierSample);
  }

  if (mode_ == RunMode::full) {
    for (std::size_t i = 0; i < sensors_.size(); ++i) {
      sim_.schedule(sensors_[i].cfg.sample_period,
                    [this, i] { sample_tick(i); });
    }
    sim_.schedule(0, [this] { discovery_tick(); });
    const uint64_t token = gw_.poll_token;
    sim_.schedule(0, [this, token] { poll_tick(token); });
    sim_.schedule(0, [this] { upload_tick(); });
  }
  if (provisioning) sim_.schedule(0, [this] { provision_round_tick(); });
  sim_.schedule(0, [this] { metrics_tick(); }, sim::kTierSample);
}

void Runner::apply_fault_start(const sim::FaultWindow& w) {
  log(ts() + " node=" + w.target +
      " event=fault_start kind=" + sim::to_string(w.kind));
  switch (w.kind) {
    case sim::FaultKind::internet_disconnect:
      inet_down_ = true;
      break;
    case sim::FaultKind::net_disconnect:
      if (w.target == "gateway")
        gw_.net_down = true;
      else
        sensors_[sensor_index(w.target)].net_down = true;
      break;
    case sim::FaultKind::power_loss:
      if (w.target == "gateway") {
        gw_.powered = false;
        gw_.queue.reset();  // volatile state gone, files stay
        gw_.sched.reset();
        gw_.prov.reset();
        ++gw_.poll_token;  // orphan any in-flight attempt
      } else {
        auto& s = sensors_[sensor_index(w.target)];
        s.powered = false;
        s.service.reset();
        s.prov.reset();
        s.queue.reset();
        s.notify_pending = false;
      }
      break;
  }
}

void Runner::apply_fault_end(const sim::FaultWindow& w) {
  log(ts() + " node=" + w.target +
      " event=fault_end kind=" + sim::to_string(w.kind));
  switch (w.kind) {
    case sim::FaultKind::internet_disconnect:
      inet_down_ = false;
      break;
    case sim::FaultKind::net_disconnect:
      if (w.target == "gateway")
        gw_.net_down = false;
      else
        sensors_[sensor_index(w.target)].net_down = false;
      break;
    case sim::FaultKind::power_loss:
      if (w.target == "gateway")
        gateway_power_up();
      else
        sensor_power_up(sensor_index(w.target));
      break;
  }
}

void Runner::sensor_power_up(std::size_t i) {
  auto& s = sensors_[i];
  s.powered = true;
  s.queue.emplace(
      DurableQueue::recover(work_ / (s.cfg.sensor_id + ".queue")));
  s.service.emplace(*s.queue);
  if (cfg_.deployment.provisioning && !s.connected) {
    const auto& p = *cfg_.deployment.provisioning;
    s.prov.emplace(p.keys, p.id, p.table, p.scan);  // replay floor is volatile
  }
  if (cfg_.deployment.provisioning && s.connected && !prov_done_) {
    // Re-announce after reboot so the deployer's view converges.
    s.notify_pending = true;
    sim_.schedule(sim_.now(), [this, i] { notify_tick(i); });
  }
  if (s.queue->len() != s.mirror.size()) {
    report_.conservation_ok = false;
    report_.conservation_error = "queue/mirror divergence after restart of " +
                                 s.cfg.sensor_id;
  }
}

void Runner::gateway_power_up() {
  gw_.powered = true;
  gw_.queue.emplace(DurableQueue::recover(work_ / "gateway.queue"));
  gw_.sched.emplace(scheduler_config());  // ring and pending acks were volatile
  if (cfg_.deployment.provisioning && !prov_done_) {
    const auto& p = *cfg_.deployment.provisioning;
    std::set<std::string> expected;
    for (const auto& sc : cfg_.deployment.sensors)
      expected.insert(sc.sensor_id);
    gw_.prov.emplace(p.keys, p.id, p.table, expected, p.escalation_period);
  }
  if (gw_.queue->len() != gw_.mirror.size()) {
    report_.conservation_ok = false;
    report_.conservation_error = "gateway queue/mirror divergence after restart";
  }
  if (mode_ == RunMode::full) {
    // One-shot probe to rebuild the ring, and a fresh poll chain (the old
    // one died with the power).
    sim_.schedule(sim_.now(), [this] { discovery_probe(); });
    const uint64_t token = gw_.poll_token;
    sim_.schedule(sim_.now() + 1, [this, token] { poll_tick(token); });
  }
}

void Runner::sample_tick(std::size_t i) {
  auto& s = sensors_[i];
  const uint64_t now = sim_.now();
  if (now >= cfg_.duration) return;
  if (s.powered) {
    for (const auto& metric : s.cfg.metrics) {
      DataSample sample{s.cfg.sensor_id, metric,
                        synth_value(s.cfg.sensor_id, metric, now), now};
      generated_[{sample.sensor_id, sample.metric, sample.measured_at}] =
          sample.value;
      if (s.queue->push(sample)) {
        s.mirror.push_back({sample.sensor_id, sample.metric,
                            sample.measured_at});
      } else {
        ++report_.dropped_before_push;
        log(ts() + " sensor=" + s.cfg.sensor_id + " event=push_failed");
      }
    }
    trace_sensor_depth(i);
  }
  sim_.schedule(now + s.cfg.sample_period, [this, i] { sample_tick(i); });
}

void Runner::provision_round_tick() {
  const uint64_t now = sim_.now();
  if (prov_done_ || now >= cfg_.duration) return;
  const auto& p = *cfg_.deployment.provisioning;
  if (gw_.powered && gw_.prov && !gw_.net_down) {
    RngSource rng(seal_rng_);
    const auto frames = gw_.prov->emit_round(p.creds, now, rng);
    const auto head =
        unpack_header({frames[0].src[0], frames[0].src[1], frames[0].src[2]});
    const uint8_t round_index = head ? head->fec_index : 0;
    log(ts() + " node=gateway event=round n=" + std::to_string(frames.size()) +
        " loss_index=" + std::to_string(round_index));
    for (std::size_t i = 0; i < sensors_.size(); ++i) {
      auto& s = sensors_[i];
      if (s.connected || !s.powered || s.net_down || !s.prov) continue;
      if (s.prov->scan_channel(now) != p.gateway_channel) continue;
      for (const auto& frame : frames) {
        if (s.covert_rng.chance(cfg_.loss.p_at(now))) continue;  // frame lost
        const auto ev = s.prov->ingest(frame);
        if (ev.kind == ProvisionEventKind::ignored ||
            ev.kind == ProvisionEventKind::buffered)
          continue;
        log(ts() + " sensor=" + s.cfg.sensor_id +
            " event=" + to_string(ev.kind));
        if (ev.kind == ProvisionEventKind::credentials_recovered &&
            s.prov->credentials() == p.creds) {
          s.connected = true;
          s.notify_pending = true;
          auto& outcome = report_.provisioning[s.cfg.sensor_id];
          outcome.recovered = true;
          outcome.round = gw_.prov->rounds_sent();
          outcome.at = now;
          outcome.loss_index = round_index;
          sim_.schedule(now, [this, i] { notify_tick(i); });
        }
      }
    }
  }
  sim_.schedule(now + p.round_interval, [this] { provision_round_tick(); });
}

void Runner::notify_tick(std::size_t i) {
  auto& s = sensors_[i];
  const uint64_t now = sim_.now();
  if (!s.notify_pending || !s.powered || now >= cfg_.duration) return;
  // Connect notification with confirmation, retried until it lands.
  if (home_path_ok(s) && gw_.prov && !s.net_rng.chance(cfg_.loss.p_at(now)) &&
      !s.net_rng.chance(cfg_.loss.p_at(now))) {
    const auto status = gw_.prov->note_connected(s.cfg.sensor_id);
    s.notify_pending = false;
    log(ts() + " sensor=" + s.cfg.sensor_id + " event=connected (" +
        std::to_string(status.connected) + "/" +
        std::to_string(status.expected) + ")");
    if (status.done) {
      prov_done_ = true;
      log(ts() + " node=gateway event=provisioning_complete");
    }
    return;
  }
  sim_.schedule(now + 2, [this, i] { notify_tick(i); });
}

void Runner::discovery_probe() {
  if (!gw_.powered || !gw_.sched) return;
  std::vector<SensorDescriptor> found;
  const double loss = cfg_.loss.p_at(sim_.now());
  for (auto& s : sensors_) {
    if (!home_path_ok(s) || !s.connected) continue;
    if (s.net_rng.chance(loss)) continue;  // probe lost
    if (s.net_rng.chance(loss)) continue;  // response lost
    found.push_back(
        SensorDescriptor{s.cfg.sensor_id, s.cfg.sensor_id, s.cfg.metrics});
  }
  const std::size_t before = gw_.sched->ring().size();
  gw_.sched->merge_discovered(found);
  for (std::size_t i = before; i < gw_.sched->ring().size(); ++i)
    log(ts() + " node=gateway event=discovered sensor=" +
        gw_.sched->ring()[i].sensor_id);
}

void Runner::discovery_tick() {
  const uint64_t now = sim_.now();
  if (now >= cfg_.duration) return;
  discovery_probe();
  sim_.schedule(now + cfg_.deployment.gateway.discovery_interval,
                [this] { discovery_tick(); });
}

void Runner::poll_tick(uint64_t token) {
  if (token != gw_.poll_token) return;
  const uint64_t now = sim_.now();
  if (now >= cfg_.duration) return;
  if (!gw_.powered || !gw_.sched || !gw_.sched->has_targets()) {
    sim_.schedule(now + cfg_.deployment.gateway.pull_interval,
                  [this, token] { poll_tick(token); });
    return;
  }
  gw_.cur_req = gw_.sched->take_request();
  gw_.attempt = 0;
  poll_attempt(token);
}

void Runner::poll_attempt(uint64_t token) {
  if (token != gw_.poll_token || !gw_.powered || !gw_.sched) return;
  const uint64_t now = sim_.now();
  const GatewayConfig& g = cfg_.deployment.gateway;
  const std::string target = gw_.sched->current().sensor_id;
  auto& s = sensors_[sensor_index(target)];

  // Request leg, then response leg; the sensor processes the request even
  // when the response is lost, which is exactly the case the ack discipline
  // has to survive.
  std::optional<PullResponse> resp;
  const double loss = cfg_.loss.p_at(now);
  if (home_path_ok(s) && s.connected && s.service &&
      !s.net_rng.chance(loss)) {
    PullResponse r = s.service->handle_pull(gw_.cur_req);
    if (gw_.cur_req.ack > 0) {
      for (uint32_t a = 0; a < gw_.cur_req.ack &&
                           r.status == PullResponse::Status::ok;
           ++a)
        s.mirror.pop_front();
      if (r.status == PullResponse::Status::ok)
        trace_sensor_depth(sensor_index(target));
    }
    if (!s.net_rng.chance(loss)) resp = std::move(r);
  }

  if (!resp) {
    if (gw_.attempt < g.retries) {
      ++gw_.attempt;
      gw_.cur_req.ack = 0;  // never re-ack: the first send may have landed
      sim_.schedule(now + g.timeout, [this, token] { poll_attempt(token); });
    } else {
      log(ts() + " node=gateway event=pull_timeout sensor=" + target);
      finish_poll(token, gw_.sched->on_give_up());
    }
    return;
  }

  if (resp->status == PullResponse::Status::ack_overrun) {
    log(ts() + " node=gateway event=pull_overrun sensor=" + target);
    finish_poll(token, gw_.sched->on_response(*resp, 0));
    return;
  }

  std::size_t stored = 0;
  for (const auto& sample : resp->samples) {
    if (!gw_.queue->push(sample)) break;
    gw_.mirror.push_back({sample.sensor_id, sample.metric,
                          sample.measured_at});
    ++stored;
  }
  if (stored > 0) trace_gateway_depth();
  log(ts() + " node=gateway event=pull sensor=" + target +
      " got=" + std::to_string(resp->samples.size()) +
      " stored=" + std::to_string(stored) +
      " remaining=" + std::to_string(resp->remaining));
  finish_poll(token, gw_.sched->on_response(*resp, stored));
}

void Runner::finish_poll(uint64_t token, PollScheduler::Advance advance) {
  sim_.schedule(sim_.now() + gw_.sched->delay_after(advance),
                [this, token] { poll_tick(token); });
}

void Runner::upload_tick() {
  const uint64_t now = sim_.now();
  if (now >= cfg_.duration) return;
  if (gw_.powered && gw_.queue && gw_.queue->len() > 0 && internet_ok()) {
    auto batch = gw_.queue->peek(gw_.queue->len());
    std::vector<DataSample> samples;
    samples.reserve(batch.size());
    for (auto& [offset, sample] : batch) samples.push_back(std::move(sample));
    const auto result = sink_.write(samples);
    if (result && internet_ok()) {  // confirmation reaches the gateway
      gw_.queue->ack(samples.size());
      for (std::size_t i = 0; i < samples.size(); ++i) gw_.mirror.pop_front();
      trace_gateway_depth();
      report_.duplicates_detected += result->duplicates;
      log(ts() + " node=gateway event=upload stored=" +
          std::to_string(result->stored) +
          " duplicates=" + std::to_string(result->duplicates));
    }
  }
  sim_.schedule(now + cfg_.deployment.gateway.upload_interval,
                [this] { upload_tick(); });
}

void Runner::metrics_tick() {
  const uint64_t now = sim_.now();
  MetricsRow row;
  row.t = now;
  for (const auto& s : sensors_) row.sensor_queues.push_back(s.mirror.size());
  row.gateway_queue = gw_.mirror.size();
  row.sink_count = sink_.unique_count();
  row.generated_total = generated_.size();
  report_.rows.push_back(row);

  // Conservation: every generated sample is somewhere (a queue or the sink)
  // and nothing exists that was never generated. Counts cannot express this
  // because a sample legitimately sits in two queues between store and ack.
  if (report_.conservation_ok) {
    std::set<Key> everywhere;
    for (const auto& s : sensors_)
      everywhere.insert(s.mirror.begin(), s.mirror.end());
    everywhere.insert(gw_.mirror.begin(), gw_.mirror.end());
    for (const auto& [key, value] : sink_.entries()) everywhere.insert(key);

    if (report_.dropped_before_push != 0) {
      report_.conservation_ok = false;
      report_.conservation_error = "samples dropped before persistence";
    }
    for (const auto& [key, value] : generated_) {
      if (!everywhere.contains(key)) {
        report_.conservation_ok = false;
        report_.conservation_error =
            "generated sample missing everywhere at t=" + std::to_string(now);
        break;
      }
    }
    if (report_.conservation_ok && everywhere.size() > generated_.size()) {
      report_.conservation_ok = false;
      report_.conservation_error =
          "phantom sample present at t=" + std::to_string(now);
    }
  }

  if (now + 60 <= cfg_.duration)
    sim_.schedule(now + 60, [this] { metrics_tick(); }, sim::kTierSample);
}

void Runner::finalize() {
  report_.home_id = cfg_.deployment.home_id;
  report_.generated_total = generated_.size();
  report_.sink_unique = sink_.unique_count();
  report_.exactly_once = sink_.entries() == generated_;
  report_.generated_entries = generated_;
  report_.sink_entries = sink_.entries();
  for (const auto& s : sensors_) {
    if (!report_.provisioning.contains(s.cfg.sensor_id) &&
        cfg_.deployment.provisioning)
      report_.provisioning[s.cfg.sensor_id] = {};
  }
}

MetricsReport Runner::run() {
  setup();
  sim_.run_until(cfg_.duration);
  finalize();
  return std::move(report_);
}

}  // namespace

uint64_t MetricsReport::peak(const DepthTrace& trace, uint64_t from,
                             uint64_t to) const {
  uint64_t best = 0;
  for (const auto& [t, depth] : trace)
    if (t >= from && t <= to) best = std::max(best, depth);
  return best;
}

std::optional<uint64_t> MetricsReport::first_zero_at_or_after(
    const DepthTrace& trace, uint64_t t) const {
  for (const auto& [at, depth] : trace)
    if (at >= t && depth == 0) return at;
  return std::nullopt;
}

MetricsReport run_scenario(const ScenarioConfig& cfg,
                           const std::filesystem::path& work_dir,
                           RunMode mode) {
  if (mode == RunMode::provision_only && !cfg.deployment.provisioning)
    throw ConfigError("scenario has no provisioning section");
  Runner runner(cfg, work_dir, mode);
  return runner.run();
}

namespace {

void write_samples_csv(const fs::path& path, const std::string& home_id,
                       const std::map<DedupSink::Key, double>& entries) {
  std::ofstream out(path);
  out << "home_id,sensor_id,metric,measured_at,value\n";
  for (const auto& [key, value] : entries) {
    const auto& [sensor_id, metric, measured_at] = key;
    out << home_id << ',' << sensor_id << ',' << metric << ',' << measured_at
        << ',' << format_value(value) << '\n';
  }
}

}  // namespace

void write_outputs(const MetricsReport& report,
                   const std::filesystem::path& out_dir) {
  fs::create_directories(out_dir);

  {
    std::ofstream metrics(out_dir / "metrics.csv");
    metrics << "t";
    for (const auto& id : report.sensor_ids) metrics << ",q_" << id;
    metrics << ",gateway_queue,sink_count,generated_total\n";
    for (const auto& row : report.rows) {
      metrics << row.t;
      for (uint64_t q : row.sensor_queues) metrics << ',' << q;
      metrics << ',' << row.gateway_queue << ',' << row.sink_count << ','
              << row.generated_total << '\n';
    }
  }
  write_samples_csv(out_dir / "sink.csv", report.home_id, report.sink_entries);
  write_samples_csv(out_dir / "generated.csv", report.home_id,
                    report.generated_entries);
  {
    std::ofstream events(out_dir / "events.log");
    for (const auto& line : report.events) events << line << '\n';
  }
}

namespace {

std::vector<std::string> read_csv_rows(const fs::path& path,
                                       std::string* header,
                                       std::vector<std::string>* problems) {
  std::vector<std::string> rows;
  std::ifstream in(path);
  if (!in) {
    problems->push_back("missing report file: " + path.string());
    return rows;
  }
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      if (header) *header = line;
      first = false;
      continue;
    }
    if (!line.empty()) rows.push_back(line);
  }
  return rows;
}

}  // namespace

std::vector<std::string> verify_outputs(const std::filesystem::path& out_dir) {
  std::vector<std::string> problems;

  std::string sink_header, gen_header;
  auto sink_rows =
      read_csv_rows(out_dir / "sink.csv", &sink_header, &problems);
  auto gen_rows =
      read_csv_rows(out_dir / "generated.csv", &gen_header, &problems);
  if (!problems.empty()) return problems;

  if (sink_header != gen_header)
    problems.push_back("sink.csv and generated.csv disagree on columns");

  // Exactly-once: the sink holds precisely the generated multiset. Both
  // files are written sorted, but sort defensively before comparing.
  auto sorted = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  const auto sink_sorted = sorted(sink_rows);
  const auto gen_sorted = sorted(gen_rows);
  if (sink_sorted != gen_sorted) {
    std::size_t missing = 0, extra = 0;
    for (const auto& row : gen_sorted)
      if (!std::binary_search(sink_sorted.begin(), sink_sorted.end(), row))
        ++missing;
    for (const auto& row : sink_sorted)
      if (!std::binary_search(gen_sorted.begin(), gen_sorted.end(), row))
        ++extra;
    problems.push_back("sink does not match generated samples: " +
                       std::to_string(missing) + " missing, " +
                       std::to_string(extra) + " extra");
  }
  for (std::size_t i = 1; i < sink_sorted.size(); ++i)
    if (sink_sorted[i] == sink_sorted[i - 1]) {
      problems.push_back("duplicate row in sink.csv: " + sink_sorted[i]);
      break;
    }

  std::string metrics_header;
  auto metric_rows =
      read_csv_rows(out_dir / "metrics.csv", &metrics_header, &problems);
  uint64_t prev_sink = 0, prev_gen = 0;
  uint64_t last_sink = 0;
  for (const auto& row : metric_rows) {
    std::vector<uint64_t> cols;
    std::stringstream ss(row);
    std::string field;
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      uint64_t v = 0;
      auto [p, ec] = std::from_chars(field.data(),
                                     field.data() + field.size(), v);
      if (ec != std::errc{} || p != field.data() + field.size()) {
        numeric = false;
        break;
      }
      cols.push_back(v);
    }
    if (!numeric || cols.size() < 4) {
      problems.push_back("malformed metrics.csv row: " + row);
      break;
    }
    const uint64_t generated = cols.back();
    const uint64_t sink_count = cols[cols.size() - 2];
    uint64_t queued = 0;
    for (std::size_t i = 1; i + 2 < cols.size(); ++i) queued += cols[i];

    if (sink_count > generated)
      problems.push_back("sink exceeds generated at t=" +
                         std::to_string(cols[0]));
    if (queued + sink_count < generated)
      problems.push_back("samples unaccounted for at t=" +
                         std::to_string(cols[0]));
    if (sink_count < prev_sink || generated < prev_gen)
      problems.push_back("counters regressed at t=" + std::to_string(cols[0]));
    prev_sink = sink_count;
    prev_gen = generated;
    last_sink = sink_count;
  }
  if (!metric_rows.empty() && last_sink != sink_rows.size())
    problems.push_back("metrics.csv final sink count disagrees with sink.csv");

  return problems;
}

}  // namespace epifi
