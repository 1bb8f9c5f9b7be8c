#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace bank::persistence {

using nlohmann::json;

// Record kinds written to the journal.
namespace kind {
inline constexpr std::string_view kTxCommitted = "TX_COMMITTED";
inline constexpr std::string_view kCustomerCreated = "CUSTOMER_CREATED";
inline constexpr std::string_view kAccountOpened = "ACCOUNT_OPENED";
inline constexpr std::string_view kAccountStatus = "ACCOUNT_STATUS";
inline constexpr std::string_view kBillerRegistered = "BILLER_REGISTERED";
inline constexpr std::string_view kBillerStatus = "BILLER_STATUS";
inline constexpr std::string_view kChequeRequest = "CHEQUE_REQUEST";
inline constexpr std::string_view kChequeDecision = "CHEQUE_DECISION";
inline constexpr std::string_view kStopOrder = "STOP_ORDER";
inline constexpr std::string_view kCredentialSet = "CREDENTIAL_SET";
inline constexpr std::string_view kProfileUpdated = "PROFILE_UPDATED";
inline constexpr std::string_view kAudit = "AUDIT";
}  // namespace kind

// IEEE 802.3 CRC-32.
std::uint32_t crc32(std::string_view bytes) noexcept;

std::string crc_hex(std::uint32_t crc);

// Canonical JSON: keys sorted bytewise, no insignificant whitespace,
// integers in base 10. Throws BankError(VALIDATION) on invalid UTF-8.
std::string canonical(const json& value);

// Appends `,"<field>":"<8 hex crc>"}` to the canonical form of `body`, with
// the crc computed over the canonical bytes preceding the closing brace.
std::string seal(const json& body, std::string_view crc_field);

// Inverse of seal(). Returns the body with the crc field removed, or nullopt
// when the line is not well formed or the checksum does not verify.
std::optional<json> unseal(std::string_view line, std::string_view crc_field);

struct JournalRecord {
  std::uint64_t seq = 0;
  std::int64_t ts = 0;
  std::string kind;
  json payload = json::object();

  friend bool operator==(const JournalRecord&, const JournalRecord&) = default;
};

// Canonical line for a record, without the trailing newline.
std::string encode_record(const JournalRecord& record);

std::optional<JournalRecord> decode_record(std::string_view line);

struct ParsedJournal {
  std::vector<JournalRecord> records;
  // Byte length of the verified prefix (always ends at a newline).
  std::size_t valid_bytes = 0;
  bool torn_tail = false;
  std::optional<std::string> warning;

  std::uint64_t last_seq() const { return records.empty() ? 0 : records.back().seq; }
};

// Verifies every line. A failing line that is not the last one raises
// CorruptRecordError carrying the sequence number that line should have had;
// a failing last line (or one missing its newline) is dropped as a torn tail.
ParsedJournal parse_journal(std::string_view bytes);

struct PendingRecord {
  std::string kind;
  json payload;
  std::int64_t ts = 0;
};

// Destination for committed records. Implementations assign sequence numbers
// and must not return before the records are durable.
class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual std::vector<JournalRecord> append(std::vector<PendingRecord> batch) = 0;
  virtual std::uint64_t last_seq() const = 0;

  JournalRecord append(std::string_view kind, json payload, std::int64_t ts);
};

// In-memory sink. Keeps the encoded lines so tests can hand them to replay.
class MemoryJournal final : public RecordSink {
 public:
  using RecordSink::append;
  std::vector<JournalRecord> append(std::vector<PendingRecord> batch) override;
  std::uint64_t last_seq() const override;

  std::string bytes() const;
  std::vector<JournalRecord> records() const;

 private:
  mutable std::mutex mu_;
  std::vector<JournalRecord> records_;
  std::string bytes_;
};

enum class Durability {
  Flush,  // write(2) before returning
  Sync,   // write(2) then fdatasync(2)
};

// Append-only `journal.log`. One write per batch, so a batch is flushed (and
// synced) as a group before any of its records is acknowledged.
class Journal final : public RecordSink {
 public:
  // Opens or creates the file, truncating it to `valid_bytes` first so a torn
  // tail from a previous crash is discarded before new records follow it.
  Journal(std::filesystem::path path, Durability durability, std::uint64_t last_seq,
          std::size_t valid_bytes);
  ~Journal() override;

  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  using RecordSink::append;
  std::vector<JournalRecord> append(std::vector<PendingRecord> batch) override;
  std::uint64_t last_seq() const override;

  void close();
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  Durability durability_;
  mutable std::mutex mu_;
  int fd_ = -1;
  std::uint64_t last_seq_ = 0;
};

inline constexpr std::string_view kJournalFile = "journal.log";

}  // namespace bank::persistence
