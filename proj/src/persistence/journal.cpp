#include "bank/persistence/journal.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstdio>
#include <cstring>

#include "bank/error.hpp"

namespace bank::persistence {

std::uint32_t crc32(std::string_view bytes) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large inputs in chunks.
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string crc_hex(std::uint32_t crc) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

std::string canonical(const json& value) {
  try {
    return value.dump();
  } catch (const json::type_error& e) {
    fail(ErrorCode::Validation, std::string("cannot encode value: ") + e.what());
  }
}

std::string seal(const json& body, std::string_view crc_field) {
  std::string text = canonical(body);
  text.pop_back();  // closing brace
  const std::uint32_t crc = crc32(text);
  text += ",\"";
  text += crc_field;
  text += "\":\"";
  text += crc_hex(crc);
  text += "\"}";
  return text;
}

std::optional<json> unseal(std::string_view line, std::string_view crc_field) {
  // Suffix shape: ,"<field>":"xxxxxxxx"}
  const std::size_t suffix_len = crc_field.size() + 15;
  if (line.size() < suffix_len + 1 || line.front() != '{') return std::nullopt;
  const std::string_view prefix = line.substr(0, line.size() - suffix_len);
  const std::string_view suffix = line.substr(line.size() - suffix_len);
  const std::string expected_head = ",\"" + std::string(crc_field) + "\":\"";
  if (suffix.substr(0, expected_head.size()) != expected_head || suffix.substr(suffix_len - 2) != "\"}") {
    return std::nullopt;
  }
  const std::string_view hex = suffix.substr(expected_head.size(), 8);
  if (crc_hex(crc32(prefix)) != hex) return std::nullopt;
  std::string body(prefix);
  body.push_back('}');
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

std::string encode_record(const JournalRecord& record) {
  json body = {
      {"seq", record.seq},
      {"ts", record.ts},
      {"kind", record.kind},
      {"payload", record.payload},
  };
  return seal(body, "crc");
}

std::optional<JournalRecord> decode_record(std::string_view line) {
  auto body = unseal(line, "crc");
  if (!body || body->size() != 4) return std::nullopt;
  const json& b = *body;
  if (!b.contains("seq") || !b["seq"].is_number_unsigned() || !b.contains("ts") ||
      !b["ts"].is_number_integer() || !b.contains("kind") || !b["kind"].is_string() ||
      !b.contains("payload") || !b["payload"].is_object()) {
    return std::nullopt;
  }
  return JournalRecord{b["seq"].get<std::uint64_t>(), b["ts"].get<std::int64_t>(),
                       b["kind"].get<std::string>(), b["payload"]};
}

ParsedJournal parse_journal(std::string_view bytes) {
  ParsedJournal out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    const bool last = nl == std::string_view::npos || nl + 1 == bytes.size();
    const std::uint64_t expected = out.last_seq() + 1;
    std::optional<JournalRecord> record;
    if (nl != std::string_view::npos) {
      record = decode_record(bytes.substr(pos, nl - pos));
      if (record && record->seq != expected) record.reset();
    }
    if (!record) {
      if (!last) throw CorruptRecordError(expected, "checksum or sequence mismatch");
      out.torn_tail = true;
      out.warning = "dropped torn final record at seq " + std::to_string(expected) + " (" +
                    std::to_string(bytes.size() - pos) + " bytes)";
      break;
    }
    out.records.push_back(std::move(*record));
    pos = nl + 1;
    out.valid_bytes = pos;
  }
  return out;
}

JournalRecord RecordSink::append(std::string_view kind, json payload, std::int64_t ts) {
  std::vector<PendingRecord> batch;
  batch.push_back(PendingRecord{std::string(kind), std::move(payload), ts});
  return append(std::move(batch)).front();
}

std::vector<JournalRecord> MemoryJournal::append(std::vector<PendingRecord> batch) {
  std::lock_guard lock(mu_);
  std::vector<JournalRecord> out;
  std::string lines;
  std::uint64_t seq = records_.empty() ? 0 : records_.back().seq;
  for (auto& p : batch) {
    JournalRecord r{++seq, p.ts, std::move(p.kind), std::move(p.payload)};
    lines += encode_record(r);
    lines.push_back('\n');
    out.push_back(std::move(r));
  }
  bytes_ += lines;
  records_.insert(records_.end(), out.begin(), out.end());
  return out;
}

std::uint64_t MemoryJournal::last_seq() const {
  std::lock_guard lock(mu_);
  return records_.empty() ? 0 : records_.back().seq;
}

std::string MemoryJournal::bytes() const {
  std::lock_guard lock(mu_);
  return bytes_;
}

std::vector<JournalRecord> MemoryJournal::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

namespace {

[[noreturn]] void storage_failure(const std::string& what) {
  fail(ErrorCode::StorageFailure, what + ": " + std::strerror(errno));
}

}  // namespace

Journal::Journal(std::filesystem::path path, Durability durability, std::uint64_t last_seq,
                 std::size_t valid_bytes)
    : path_(std::move(path)), durability_(durability), last_seq_(last_seq) {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_CLOEXEC, 0600);
  if (fd_ < 0) storage_failure("open " + path_.string());
  if (::ftruncate(fd_, static_cast<off_t>(valid_bytes)) != 0 ||
      ::lseek(fd_, 0, SEEK_END) < 0) {
    const int saved = errno;
    ::close(fd_);
    fd_ = -1;
    errno = saved;
    storage_failure("prepare " + path_.string());
  }
}

Journal::~Journal() { close(); }

void Journal::close() {
  std::lock_guard lock(mu_);
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::uint64_t Journal::last_seq() const {
  std::lock_guard lock(mu_);
  return last_seq_;
}

std::vector<JournalRecord> Journal::append(std::vector<PendingRecord> batch) {
  std::lock_guard lock(mu_);
  if (fd_ < 0) fail(ErrorCode::StorageFailure, "journal is closed");

  std::vector<JournalRecord> out;
  out.reserve(batch.size());
  std::string lines;
  std::uint64_t seq = last_seq_;
  for (auto& p : batch) {
    JournalRecord r{++seq, p.ts, std::move(p.kind), std::move(p.payload)};
    lines += encode_record(r);
    lines.push_back('\n');
    out.push_back(std::move(r));
  }

  const off_t start = ::lseek(fd_, 0, SEEK_END);
  std::size_t written = 0;
  while (written < lines.size()) {
    const ssize_t n = ::write(fd_, lines.data() + written, lines.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int saved = errno;
      // Leave no partial batch behind for the next append to follow.
      if (start >= 0 && ::ftruncate(fd_, start) == 0) (void)::lseek(fd_, start, SEEK_SET);
      errno = saved;
      storage_failure("write " + path_.string());
    }
    written += static_cast<std::size_t>(n);
  }
  if (durability_ == Durability::Sync && ::fdatasync(fd_) != 0) {
    storage_failure("fdatasync " + path_.string());
  }
  last_seq_ = seq;
  return out;
}

}  // namespace bank::persistence
