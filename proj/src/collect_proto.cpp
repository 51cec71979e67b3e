#include "epifi/collect_proto.hpp"

#include <algorithm>
#include <charconv>

namespace epifi {

PullResponse SensorDataService::handle_pull(const PullRequest& req) {
  PullResponse resp;
  if (req.ack > last_response_count_) {
    resp.status = PullResponse::Status::ack_overrun;
    resp.remaining = queue_.len();
    return resp;
  }
  queue_.ack(req.ack);
  last_response_count_ = 0;

  auto batch = queue_.peek(req.want);
  resp.samples.reserve(batch.size());
  for (auto& [offset, sample] : batch) resp.samples.push_back(std::move(sample));
  resp.remaining = queue_.len() - resp.samples.size();
  last_response_count_ = resp.samples.size();
  return resp;
}

void PollScheduler::merge_discovered(
    const std::vector<SensorDescriptor>& found) {
  for (const auto& d : found) {
    const bool known =
        std::any_of(ring_.begin(), ring_.end(), [&](const SensorDescriptor& r) {
          return r.sensor_id == d.sensor_id;
        });
    if (!known) ring_.push_back(d);
  }
}

const SensorDescriptor& PollScheduler::current() const {
  if (ring_.empty()) throw std::logic_error("poll ring is empty");
  return ring_[current_];
}

PullRequest PollScheduler::take_request() {
  PullRequest req;
  req.want = cfg_.want_per_request;
  auto it = pending_ack_.find(current().sensor_id);
  if (it != pending_ack_.end()) {
    req.ack = it->second;
    it->second = 0;
  }
  return req;
}

void PollScheduler::advance_ring() {
  session_pulled_ = 0;
  current_ = (current_ + 1) % ring_.size();
}

PollScheduler::Advance PollScheduler::on_response(const PullResponse& resp,
                                                  std::size_t stored_count) {
  const std::string& id = current().sensor_id;
  if (resp.status == PullResponse::Status::ack_overrun) {
    // The sensor refused our ack (likely it restarted). Reissue with zero;
    // nothing was deleted, so nothing is lost.
    pending_ack_[id] = 0;
    advance_ring();
    return Advance::next_error;
  }
  // Only what actually landed on disk may be acknowledged.
  pending_ack_[id] = static_cast<uint32_t>(stored_count);
  if (stored_count < resp.samples.size()) {
    advance_ring();
    return Advance::next_error;
  }

  session_pulled_ += resp.samples.size();

  if (resp.samples.size() < cfg_.want_per_request) {
    advance_ring();
    return Advance::next_partial;
  }
  if (session_pulled_ >= cfg_.round_cap) {
    advance_ring();
    return Advance::next_cap;
  }
  return Advance::stay_backlog;
}

PollScheduler::Advance PollScheduler::on_give_up() {
  pending_ack_[current().sensor_id] = 0;
  advance_ring();
  return Advance::next_timeout;
}

uint64_t PollScheduler::delay_after(Advance a) const {
  switch (a) {
    case Advance::stay_backlog:
    case Advance::next_cap:
      return cfg_.backlog_interval;
    case Advance::next_partial:
    case Advance::next_timeout:
    case Advance::next_error:
      return cfg_.pull_interval;
  }
  return cfg_.pull_interval;
}

std::optional<DedupSink::WriteResult> DedupSink::write(
    std::span<const DataSample> samples) {
  if (fault_ && fault_()) return std::nullopt;
  WriteResult r;
  for (const auto& s : samples) {
    auto [it, inserted] =
        store_.try_emplace({s.sensor_id, s.metric, s.measured_at}, s.value);
    (void)it;
    if (inserted)
      ++r.stored;
    else
      ++r.duplicates;
  }
  return r;
}

bool DedupSink::contains(const DataSample& s) const {
  return store_.contains({s.sensor_id, s.metric, s.measured_at});
}

void DedupSink::export_csv(std::ostream& out) const {
  out << "home_id,sensor_id,metric,measured_at,value\n";
  for (const auto& [key, value] : store_) {
    const auto& [sensor_id, metric, measured_at] = key;
    char num[64];
    auto [end, ec] = std::to_chars(num, num + sizeof(num), value);
    (void)ec;
    out << home_id_ << ',' << sensor_id << ',' << metric << ',' << measured_at
        << ',' << std::string_view(num, static_cast<size_t>(end - num))
        << '\n';
  }
}

}  // namespace epifi
