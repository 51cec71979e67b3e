#include <doctest.h>

#include <fstream>
#include <sstream>

#include "epifi/scenario.hpp"
#include "epifi/simnet.hpp"
#include "support/test_util.hpp"

using namespace epifi;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTinyScenario = R"(
home_id: home-sim
duration: 1800
seed: 7
sensors:
  - sensor_id: dylos-1
    metrics: [small_particles]
    sample_period_seconds: 60
)";

}  // namespace

TEST_CASE("same-time events fire in insertion order") {
  sim::Simulator s;
  std::vector<char> order;
  s.schedule(5, [&] { order.push_back('A'); });
  s.schedule(5, [&] { order.push_back('B'); });
  s.schedule(3, [&] { order.push_back('C'); });
  s.run_until(10);
  CHECK(order == std::vector<char>{'C', 'A', 'B'});
  CHECK(s.now() == 10);
}

TEST_CASE("an event at the current instant still fires") {
  sim::Simulator s;
  bool inner = false;
  s.schedule(4, [&] { s.schedule(4, [&] { inner = true; }); });
  s.run_until(4);
  CHECK(inner);
}

TEST_CASE("scheduling in the past is an error") {
  sim::Simulator s;
  s.schedule(10, [] {});
  s.run_until(10);
  CHECK_THROWS_AS(s.schedule(9, [] {}), sim::PastEvent);
}

TEST_CASE("the sample tier runs before normal events at the same time") {
  sim::Simulator s;
  std::vector<char> order;
  s.schedule(5, [&] { order.push_back('n'); }, sim::kTierNormal);
  s.schedule(5, [&] { order.push_back('s'); }, sim::kTierSample);
  s.run_until(5);
  CHECK(order == std::vector<char>{'s', 'n'});
}

TEST_CASE("seeded streams are reproducible and labels decorrelate them") {
  sim::Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
  }
  CHECK(sim::derive_seed(1, "covert/s1") != sim::derive_seed(1, "covert/s2"));
  CHECK(sim::derive_seed(1, "covert/s1") != sim::derive_seed(2, "covert/s1"));
  CHECK(sim::derive_seed(1, "covert/s1") == sim::derive_seed(1, "covert/s1"));
}

TEST_CASE("bernoulli loss endpoints and empirical rate") {
  sim::Rng zero_rng(1);
  sim::Rng one_rng(2);
  for (int i = 0; i < 1000; ++i) {
    CHECK(!zero_rng.chance(0.0));  // p=0 always delivers
    CHECK(one_rng.chance(1.0));    // p=1 always drops
  }

  // The close-range loss preset, checked at law-of-large-numbers scale.
  const auto p = sim::LossModel::preset("table-loss/loc1/close");
  REQUIRE(p);
  CHECK(*p == doctest::Approx(0.37));
  sim::Rng rng(sim::derive_seed(99, "loss"));
  int dropped = 0;
  for (int i = 0; i < 10000; ++i)
    if (rng.chance(*p)) ++dropped;
  CHECK(dropped > (0.37 - 0.02) * 10000);
  CHECK(dropped < (0.37 + 0.02) * 10000);
}

TEST_CASE("the full measured-loss preset table is available") {
  CHECK(*sim::LossModel::preset("table-loss/loc2/medium") ==
        doctest::Approx(0.36));
  CHECK(*sim::LossModel::preset("table-loss/loc3/far") == doctest::Approx(1.0));
  CHECK(*sim::LossModel::preset("pi-vs-bbb/pi/close") ==
        doctest::Approx(0.018));
  CHECK(*sim::LossModel::preset("pi-vs-bbb/bbb/far") == doctest::Approx(0.93));
  CHECK(!sim::LossModel::preset("no-such-preset"));
  CHECK(sim::LossModel::presets().size() == 15);
}

TEST_CASE("a small scenario is conservative and exactly-once") {
  testutil::TempDir dir("sim-small");
  const auto cfg = parse_config(kTinyScenario);
  const auto report = run_scenario(cfg, dir.path / "state");

  CHECK(report.generated_total == 29);  // samples at 60..1740
  CHECK(report.exactly_once);
  CHECK(report.conservation_ok);
  CHECK(report.sink_unique == report.generated_total);
  CHECK(report.dropped_before_push == 0);
  REQUIRE(!report.rows.empty());
  CHECK(report.rows.back().t == 1800);
}

TEST_CASE("identical config and seed produce byte-identical reports") {
  testutil::TempDir dir("sim-det");
  const auto cfg = parse_config(kTinyScenario);

  const auto r1 = run_scenario(cfg, dir.path / "s1");
  write_outputs(r1, dir.path / "out1");
  const auto r2 = run_scenario(cfg, dir.path / "s2");
  write_outputs(r2, dir.path / "out2");

  for (const char* name :
       {"metrics.csv", "sink.csv", "generated.csv", "events.log"}) {
    CAPTURE(name);
    const auto a = slurp(dir.path / "out1" / name);
    CHECK(!a.empty());
    CHECK(a == slurp(dir.path / "out2" / name));
  }
}

TEST_CASE("a different seed changes lossy runs") {
  testutil::TempDir dir("sim-seeds");
  auto cfg = parse_config(kTinyScenario);
  cfg.loss.p = 0.4;

  auto a = run_scenario(cfg, dir.path / "a");
  cfg.seed = 8;
  cfg.loss.seed = 8;
  auto b = run_scenario(cfg, dir.path / "b");
  CHECK(a.exactly_once);
  CHECK(b.exactly_once);
  CHECK(a.events != b.events);
}

TEST_CASE("zero sensors is a clean empty run") {
  testutil::TempDir dir("sim-zero");
  const auto cfg = parse_config("home_id: empty-home\nduration: 600\n");
  const auto report = run_scenario(cfg, dir.path / "state");
  CHECK(report.generated_total == 0);
  CHECK(report.sink_unique == 0);
  CHECK(report.exactly_once);
  CHECK(report.conservation_ok);
}

TEST_CASE("lossy collection still delivers everything exactly once") {
  testutil::TempDir dir("sim-lossy");
  auto cfg = parse_config(kTinyScenario);
  cfg.loss.p = 0.5;       // every request/response leg flips a coin
  cfg.loss.until = 2700;  // then a clean window to drain into
  cfg.duration = 3600;
  const auto report = run_scenario(cfg, dir.path / "state");
  CHECK(report.exactly_once);
  CHECK(report.conservation_ok);
  CHECK(report.generated_total == 59);
}

TEST_CASE("sensor power loss mid-run loses no data") {
  testutil::TempDir dir("sim-power");
  auto cfg = parse_config(kTinyScenario);
  sim::FaultWindow w;
  w.target = "dylos-1";
  w.kind = sim::FaultKind::power_loss;
  w.start = 300;
  w.end = 600;
  cfg.faults.push_back(w);

  const auto report = run_scenario(cfg, dir.path / "state");
  // The device was dark for five minutes: those measurements never existed.
  CHECK(report.generated_total == 24);
  CHECK(report.exactly_once);
  CHECK(report.conservation_ok);
}

TEST_CASE("fault isolation: internet loss never backs up the sensor") {
  testutil::TempDir dir("sim-iso");
  auto cfg = parse_config(kTinyScenario);
  sim::FaultWindow w;
  w.target = "gateway";
  w.kind = sim::FaultKind::internet_disconnect;
  w.start = 300;
  w.end = 900;
  cfg.faults.push_back(w);

  const auto report = run_scenario(cfg, dir.path / "state");
  CHECK(report.exactly_once);
  const auto& trace = report.sensor_depth.at("dylos-1");
  CHECK(report.peak(trace, 0, 1800) <= 1);
  CHECK(report.peak(report.gateway_depth, 300, 900) >= 8);
}
