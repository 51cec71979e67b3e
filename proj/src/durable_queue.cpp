#include "epifi/durable_queue.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <charconv>
#include <cstring>
#include <span>

namespace epifi {

namespace {

constexpr char kMagic[4] = {'E', 'P', 'Q', '1'};
constexpr std::size_t kLogHeaderSize = 12;
constexpr std::size_t kRecordHeaderSize = 8;
constexpr std::size_t kMaxPayload = 1 << 20;
constexpr char kSep = '\x1f';

uint32_t crc_of(std::span<const uint8_t> data) {
  return static_cast<uint32_t>(
      ::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

void put_be32(uint8_t* out, uint32_t v) {
  out[0] = static_cast<uint8_t>(v >> 24);
  out[1] = static_cast<uint8_t>(v >> 16);
  out[2] = static_cast<uint8_t>(v >> 8);
  out[3] = static_cast<uint8_t>(v);
}

void put_be64(uint8_t* out, uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out[i] = static_cast<uint8_t>(v >> (56 - 8 * i));
}

uint32_t get_be32(const uint8_t* in) {
  return (static_cast<uint32_t>(in[0]) << 24) |
         (static_cast<uint32_t>(in[1]) << 16) |
         (static_cast<uint32_t>(in[2]) << 8) | in[3];
}

uint64_t get_be64(const uint8_t* in) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | in[i];
  return v;
}

bool write_all(int fd, std::span<const uint8_t> data) {
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n <= 0) return false;
    done += static_cast<std::size_t>(n);
  }
  return true;
}

// Atomic replace: write tmp, fsync, rename, fsync the directory.
bool write_file_atomic(const std::filesystem::path& path,
                       std::span<const uint8_t> data) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) return false;
  bool ok = write_all(fd, data) && ::fsync(fd) == 0;
  ::close(fd);
  if (!ok || ::rename(tmp.c_str(), path.c_str()) != 0) return false;
  int dfd = ::open(path.parent_path().empty()
                       ? "."
                       : path.parent_path().c_str(),
                   O_RDONLY | O_DIRECTORY);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
  return true;
}

std::vector<uint8_t> encode_record(std::span<const uint8_t> payload) {
  std::vector<uint8_t> rec(kRecordHeaderSize + payload.size());
  put_be32(rec.data(), static_cast<uint32_t>(payload.size()));
  put_be32(rec.data() + 4, crc_of(payload));
  std::memcpy(rec.data() + 8, payload.data(), payload.size());
  return rec;
}

}  // namespace

std::vector<uint8_t> to_payload(const DataSample& s) {
  char num[64];
  auto [vend, vec] = std::to_chars(num, num + sizeof(num), s.value);
  std::string value(num, vend);
  (void)vec;

  std::string line;
  line.reserve(s.sensor_id.size() + s.metric.size() + value.size() + 24);
  line += s.sensor_id;
  line += kSep;
  line += s.metric;
  line += kSep;
  line += value;
  line += kSep;
  line += std::to_string(s.measured_at);
  return {line.begin(), line.end()};
}

std::optional<DataSample> from_payload(std::span<const uint8_t> payload) {
  std::string_view sv(reinterpret_cast<const char*>(payload.data()),
                      payload.size());
  std::array<std::string_view, 4> fields;
  for (int i = 0; i < 3; ++i) {
    auto pos = sv.find(kSep);
    if (pos == std::string_view::npos) return std::nullopt;
    fields[static_cast<size_t>(i)] = sv.substr(0, pos);
    sv.remove_prefix(pos + 1);
  }
  fields[3] = sv;
  if (fields[1].empty()) return std::nullopt;  // metric non-empty

  DataSample s;
  s.sensor_id = std::string(fields[0]);
  s.metric = std::string(fields[1]);
  auto [vp, verr] = std::from_chars(fields[2].data(),
                                    fields[2].data() + fields[2].size(),
                                    s.value);
  if (verr != std::errc{} || vp != fields[2].data() + fields[2].size())
    return std::nullopt;
  auto [tp, terr] = std::from_chars(fields[3].data(),
                                    fields[3].data() + fields[3].size(),
                                    s.measured_at);
  if (terr != std::errc{} || tp != fields[3].data() + fields[3].size() ||
      s.measured_at == 0)
    return std::nullopt;
  return s;
}

DurableQueue DurableQueue::recover(const std::filesystem::path& log_path) {
  return recover(log_path, Options());
}

DurableQueue DurableQueue::recover(const std::filesystem::path& log_path,
                                   Options opts) {
  DurableQueue q;
  q.log_path_ = log_path;
  q.opts_ = opts;

  q.fd_ = ::open(log_path.c_str(), O_RDWR | O_CREAT, 0644);
  if (q.fd_ < 0) throw CorruptLog("cannot open log: " + log_path.string());

  off_t end = ::lseek(q.fd_, 0, SEEK_END);
  std::vector<uint8_t> file(static_cast<std::size_t>(end < 0 ? 0 : end));
  if (!file.empty()) {
    ::lseek(q.fd_, 0, SEEK_SET);
    std::size_t got = 0;
    while (got < file.size()) {
      ssize_t n = ::read(q.fd_, file.data() + got, file.size() - got);
      if (n <= 0) throw CorruptLog("cannot read log: " + log_path.string());
      got += static_cast<std::size_t>(n);
    }
  }

  std::size_t valid_end = 0;
  if (file.size() < kLogHeaderSize ||
      std::memcmp(file.data(), kMagic, 4) != 0) {
    // Fresh queue, or a crash before the header ever landed. There is
    // nothing durable to preserve; start at offset zero.
    q.base_ = 0;
    std::vector<uint8_t> header(kLogHeaderSize, 0);
    std::memcpy(header.data(), kMagic, 4);
    put_be64(header.data() + 4, 0);
    if (::ftruncate(q.fd_, 0) != 0 || ::lseek(q.fd_, 0, SEEK_SET) < 0 ||
        !write_all(q.fd_, header) || ::fsync(q.fd_) != 0)
      throw CorruptLog("cannot initialize log: " + log_path.string());
    valid_end = kLogHeaderSize;
  } else {
    q.base_ = get_be64(file.data() + 4);
    std::size_t pos = kLogHeaderSize;
    valid_end = pos;
    while (pos + kRecordHeaderSize <= file.size()) {
      const uint32_t len = get_be32(file.data() + pos);
      const uint32_t crc = get_be32(file.data() + pos + 4);
      if (len == 0 || len > kMaxPayload) break;  // torn or garbage tail
      if (pos + kRecordHeaderSize + len > file.size()) break;  // torn tail
      std::span<const uint8_t> payload(file.data() + pos + kRecordHeaderSize,
                                       len);
      if (crc_of(payload) != crc) break;
      auto sample = from_payload(payload);
      if (!sample) break;
      q.records_.push_back(std::move(*sample));
      q.record_bytes_.push_back(kRecordHeaderSize + len);
      pos += kRecordHeaderSize + len;
      valid_end = pos;
    }
    if (valid_end < file.size()) {
      if (::ftruncate(q.fd_, static_cast<off_t>(valid_end)) != 0)
        throw CorruptLog("cannot truncate torn tail: " + log_path.string());
    }
  }
  q.tail_ = q.base_ + q.records_.size();

  const std::filesystem::path side = log_path.string() + ".head";
  std::error_code ec;
  if (std::filesystem::exists(side, ec)) {
    int sfd = ::open(side.c_str(), O_RDONLY);
    if (sfd < 0) throw CorruptLog("cannot open head sidecar");
    uint8_t buf[12];
    ssize_t n = ::read(sfd, buf, sizeof(buf));
    ::close(sfd);
    if (n != 12) throw CorruptLog("head sidecar truncated");
    if (crc_of(std::span<const uint8_t>(buf, 8)) != get_be32(buf + 8))
      throw CorruptLog("head sidecar checksum mismatch");
    q.head_ = get_be64(buf);
    if (q.head_ < q.base_ || q.head_ > q.tail_)
      throw CorruptLog("head sidecar inconsistent with log");
  } else {
    q.head_ = q.base_;
  }

  // Drop acked records from the in-memory mirror; their bytes stay counted
  // until compaction rewrites the file.
  for (uint64_t i = q.base_; i < q.head_; ++i) q.records_.pop_front();
  ::lseek(q.fd_, 0, SEEK_END);
  return q;
}

DurableQueue::DurableQueue(DurableQueue&& other) noexcept {
  *this = std::move(other);
}

DurableQueue& DurableQueue::operator=(DurableQueue&& other) noexcept {
  if (this == &other) return *this;
  if (fd_ >= 0) ::close(fd_);
  log_path_ = std::move(other.log_path_);
  opts_ = other.opts_;
  fd_ = other.fd_;
  other.fd_ = -1;
  base_ = other.base_;
  head_ = other.head_;
  tail_ = other.tail_;
  records_ = std::move(other.records_);
  record_bytes_ = std::move(other.record_bytes_);
  write_fault_ = std::move(other.write_fault_);
  return *this;
}

DurableQueue::~DurableQueue() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<uint64_t> DurableQueue::push(const DataSample& sample) {
  std::lock_guard lock(mu_);
  const auto payload = to_payload(sample);
  const auto rec = encode_record(payload);

  const off_t old_end = ::lseek(fd_, 0, SEEK_END);
  const bool fault = write_fault_ && write_fault_();
  if (fault || !write_all(fd_, rec) || ::fsync(fd_) != 0) {
    // A failed append is invisible; restore the pre-write length.
    if (::ftruncate(fd_, old_end) != 0) ::lseek(fd_, old_end, SEEK_SET);
    return std::nullopt;
  }
  records_.push_back(sample);
  record_bytes_.push_back(rec.size());
  return tail_++;
}

std::vector<std::pair<uint64_t, DataSample>> DurableQueue::peek(
    std::size_t n) const {
  std::lock_guard lock(mu_);
  std::vector<std::pair<uint64_t, DataSample>> out;
  const std::size_t count = std::min<std::size_t>(n, records_.size());
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.emplace_back(head_ + i, records_[i]);
  return out;
}

void DurableQueue::ack(uint64_t n) {
  std::lock_guard lock(mu_);
  if (n == 0) return;
  if (n > records_.size()) throw AckOverrun("ack beyond queue length");

  write_head_sidecar(head_ + n);
  head_ += n;
  for (uint64_t i = 0; i < n; ++i) records_.pop_front();

  std::size_t acked_bytes = 0;
  for (uint64_t i = 0; i < head_ - base_; ++i) acked_bytes += record_bytes_[i];
  if (acked_bytes >= opts_.compact_threshold) compact();
}

uint64_t DurableQueue::len() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

uint64_t DurableQueue::head() const {
  std::lock_guard lock(mu_);
  return head_;
}

uint64_t DurableQueue::tail() const {
  std::lock_guard lock(mu_);
  return tail_;
}

void DurableQueue::set_write_fault_hook(std::function<bool()> hook) {
  std::lock_guard lock(mu_);
  write_fault_ = std::move(hook);
}

void DurableQueue::write_head_sidecar(uint64_t head) const {
  uint8_t buf[12];
  put_be64(buf, head);
  put_be32(buf + 8, crc_of(std::span<const uint8_t>(buf, 8)));
  if (!write_file_atomic(log_path_.string() + ".head",
                         std::span<const uint8_t>(buf, sizeof(buf))))
    throw CorruptLog("cannot persist head sidecar");
}

void DurableQueue::compact() {
  std::vector<uint8_t> fresh(kLogHeaderSize, 0);
  std::memcpy(fresh.data(), kMagic, 4);
  put_be64(fresh.data() + 4, head_);
  for (const auto& sample : records_) {
    const auto rec = encode_record(to_payload(sample));
    fresh.insert(fresh.end(), rec.begin(), rec.end());
  }
  if (!write_file_atomic(log_path_, fresh)) return;  // keep the old log

  ::close(fd_);
  fd_ = ::open(log_path_.c_str(), O_RDWR, 0644);
  if (fd_ < 0) throw CorruptLog("cannot reopen compacted log");
  ::lseek(fd_, 0, SEEK_END);

  base_ = head_;
  record_bytes_.clear();
  for (const auto& sample : records_)
    record_bytes_.push_back(kRecordHeaderSize + to_payload(sample).size());
}

}  // namespace epifi
