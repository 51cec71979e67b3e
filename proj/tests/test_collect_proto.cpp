#include <doctest.h>

#include <sstream>

#include "epifi/collect_proto.hpp"
#include "support/test_util.hpp"

using namespace epifi;

namespace {

DataSample sample(uint64_t at, const std::string& sensor = "a",
                  const std::string& metric = "m") {
  return DataSample{sensor, metric, static_cast<double>(at) / 4, at};
}

DurableQueue fresh_queue(const testutil::TempDir& dir, const std::string& name,
                         int preload = 0) {
  auto q = DurableQueue::recover(dir.path / (name + ".log"));
  for (int i = 1; i <= preload; ++i) q.push(sample(10u * i));
  return q;
}

SensorDescriptor descriptor(const std::string& id) {
  return SensorDescriptor{id, id, {"m"}};
}

}  // namespace

TEST_CASE("a sensor serves at most want samples, oldest first") {
  testutil::TempDir dir("cp-serve");
  auto q = fresh_queue(dir, "q", 5);
  SensorDataService svc(q);

  const auto resp = svc.handle_pull({10, 0});
  CHECK(resp.status == PullResponse::Status::ok);
  CHECK(resp.samples.size() == 5);  // asked for ten, has five
  CHECK(resp.remaining == 0);
  CHECK(resp.samples.front().measured_at == 10);

  auto q2 = fresh_queue(dir, "q2", 40);
  SensorDataService svc2(q2);
  const auto r2 = svc2.handle_pull({10, 0});
  CHECK(r2.samples.size() == 10);
  CHECK(r2.remaining == 30);
  CHECK(r2.samples.back().measured_at == 100);
}

TEST_CASE("serving does not delete; only the next ack deletes") {
  testutil::TempDir dir("cp-ack");
  auto q = fresh_queue(dir, "q", 12);
  SensorDataService svc(q);

  const auto first = svc.handle_pull({10, 0});
  CHECK(q.len() == 12);  // nothing deleted by the read

  // Response lost: the retry carries ack=0 and re-serves the same batch.
  const auto again = svc.handle_pull({10, 0});
  CHECK(again.samples == first.samples);
  CHECK(q.len() == 12);

  // Clean ack in the following request deletes exactly the served batch.
  const auto next = svc.handle_pull({10, 10});
  CHECK(q.len() == 2);
  CHECK(next.samples.size() == 2);
  CHECK(next.samples.front().measured_at == 110);
}

TEST_CASE("ack overrun is refused and recovered with a zero ack") {
  testutil::TempDir dir("cp-overrun");
  auto q = fresh_queue(dir, "q", 6);
  SensorDataService svc(q);

  // A restarted sensor has no memory of the previous response.
  const auto bad = svc.handle_pull({10, 4});
  CHECK(bad.status == PullResponse::Status::ack_overrun);
  CHECK(q.len() == 6);  // nothing deleted

  const auto ok = svc.handle_pull({10, 0});
  CHECK(ok.status == PullResponse::Status::ok);
  CHECK(ok.samples.size() == 6);
}

TEST_CASE("take_request consumes the pending ack exactly once") {
  PollScheduler sched;
  sched.merge_discovered({descriptor("a")});

  PullResponse resp;
  resp.samples = {sample(1), sample(2), sample(3), sample(4), sample(5),
                  sample(6), sample(7), sample(8), sample(9), sample(10)};
  sched.on_response(resp, resp.samples.size());

  CHECK(sched.take_request().ack == 10);
  CHECK(sched.take_request().ack == 0);  // a retry must not re-ack
}

TEST_CASE("partial storage acknowledges only the stored prefix") {
  PollScheduler sched;
  sched.merge_discovered({descriptor("a")});
  PullResponse resp;
  for (int i = 1; i <= 10; ++i) resp.samples.push_back(sample(10u * i));

  const auto advance = sched.on_response(resp, 7);
  CHECK(advance == PollScheduler::Advance::next_error);
  CHECK(sched.take_request().ack == 7);
}

TEST_CASE("discovery merge preserves ring order") {
  PollScheduler sched;
  sched.merge_discovered({descriptor("b")});
  sched.merge_discovered({descriptor("a"), descriptor("b"), descriptor("c")});
  REQUIRE(sched.ring().size() == 3);
  CHECK(sched.ring()[0].sensor_id == "b");
  CHECK(sched.ring()[1].sensor_id == "a");
  CHECK(sched.ring()[2].sensor_id == "c");

  sched.merge_discovered({descriptor("b")});  // duplicate response
  CHECK(sched.ring().size() == 3);
}

TEST_CASE("fairness: a 300-sample backlog yields to the neighbor after 120") {
  testutil::TempDir dir("cp-fair");
  auto qa = fresh_queue(dir, "a");
  auto qb = fresh_queue(dir, "b");
  for (int i = 1; i <= 300; ++i) qa.push(sample(static_cast<uint64_t>(i), "a"));
  for (int i = 1; i <= 5; ++i) qb.push(sample(static_cast<uint64_t>(i), "b"));
  SensorDataService sa(qa), sb(qb);

  PollScheduler sched;  // want 10, cap 120
  sched.merge_discovered({descriptor("a"), descriptor("b")});

  std::vector<std::pair<std::string, std::size_t>> trace;
  for (int step = 0; step < 40 && (qa.len() || qb.len()); ++step) {
    const std::string target = sched.current().sensor_id;
    const auto req = sched.take_request();
    const auto resp =
        target == "a" ? sa.handle_pull(req) : sb.handle_pull(req);
    trace.emplace_back(target, resp.samples.size());
    sched.on_response(resp, resp.samples.size());
  }

  // One full cycle: 12 pulls of 10 from A (the cap), then B's 5, then A.
  REQUIRE(trace.size() >= 14);
  for (int i = 0; i < 12; ++i) {
    CHECK(trace[static_cast<size_t>(i)].first == "a");
    CHECK(trace[static_cast<size_t>(i)].second == 10);
  }
  CHECK(trace[12].first == "b");
  CHECK(trace[12].second == 5);
  CHECK(trace[13].first == "a");

  // Bounded starvation: pulls of A between two B visits never exceed the cap.
  std::size_t run = 0;
  for (const auto& [who, n] : trace) {
    if (who == "a") {
      run += n;
      CHECK(run <= 120);
    } else {
      run = 0;
    }
  }
}

TEST_CASE("empty sensors advance the ring immediately") {
  testutil::TempDir dir("cp-empty");
  auto qa = fresh_queue(dir, "a", 0);
  SensorDataService sa(qa);
  PollScheduler sched;
  sched.merge_discovered({descriptor("a"), descriptor("b")});

  const auto resp = sa.handle_pull(sched.take_request());
  CHECK(resp.samples.empty());
  const auto advance = sched.on_response(resp, 0);
  CHECK(advance == PollScheduler::Advance::next_partial);
  CHECK(sched.current().sensor_id == "b");
  CHECK(sched.delay_after(advance) == sched.config().pull_interval);
}

TEST_CASE("backlog pacing differs from idle pacing") {
  PollScheduler sched;
  CHECK(sched.delay_after(PollScheduler::Advance::stay_backlog) ==
        sched.config().backlog_interval);
  CHECK(sched.delay_after(PollScheduler::Advance::next_timeout) ==
        sched.config().pull_interval);
}

TEST_CASE("timeout after retries moves on and burns the ack") {
  PollScheduler sched;
  sched.merge_discovered({descriptor("a"), descriptor("b")});
  PullResponse resp;
  for (int i = 1; i <= 10; ++i) resp.samples.push_back(sample(10u * i));
  sched.on_response(resp, 10);  // pending ack 10 for a... but a goes dark
  CHECK(sched.current().sensor_id == "a");
  CHECK(sched.take_request().ack == 10);
  const auto advance = sched.on_give_up();
  CHECK(advance == PollScheduler::Advance::next_timeout);
  CHECK(sched.current().sensor_id == "b");
}

TEST_CASE("sink writes are idempotent per key") {
  DedupSink sink("home-7");
  std::vector<DataSample> batch = {sample(60, "a", "small_particles"),
                                   sample(60, "a", "temperature"),
                                   sample(120, "a", "small_particles")};
  const auto first = sink.write(batch);
  REQUIRE(first);
  CHECK(first->stored == 3);
  CHECK(first->duplicates == 0);

  const auto again = sink.write(batch);
  REQUIRE(again);
  CHECK(again->stored == 0);
  CHECK(again->duplicates == 3);
  CHECK(sink.unique_count() == 3);

  // Two metrics from one physical reading share measured_at and both stay.
  CHECK(sink.contains(sample(60, "a", "small_particles")));
  CHECK(sink.contains(sample(60, "a", "temperature")));

  const auto none = sink.write(std::vector<DataSample>{});
  REQUIRE(none);
  CHECK(none->stored == 0);
  CHECK(none->duplicates == 0);
}

TEST_CASE("sink failure keeps nothing from the batch") {
  DedupSink sink("home-7");
  bool fail = true;
  sink.set_fault_hook([&] { return fail; });
  CHECK(!sink.write(std::vector<DataSample>{sample(60)}));
  CHECK(sink.unique_count() == 0);
  fail = false;
  CHECK(sink.write(std::vector<DataSample>{sample(60)}));
  CHECK(sink.unique_count() == 1);
}

TEST_CASE("sink export is sorted csv with exact value formatting") {
  DedupSink sink("home-7");
  sink.write(std::vector<DataSample>{
      {"b", "m", 2.5, 120}, {"a", "z", 1.25, 60}, {"a", "m", 0.75, 180}});
  std::ostringstream out;
  sink.export_csv(out);
  CHECK(out.str() ==
        "home_id,sensor_id,metric,measured_at,value\n"
        "home-7,a,m,180,0.75\n"
        "home-7,a,z,60,1.25\n"
        "home-7,b,m,120,2.5\n");
}
