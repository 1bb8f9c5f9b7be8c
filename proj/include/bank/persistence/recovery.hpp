#pragma once

#include <concepts>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bank/persistence/journal.hpp"

namespace bank::persistence {

// A value that can be rebuilt by applying journal records in order and can be
// captured whole in a snapshot.
template <typename S>
concept ReplayableState = std::default_initializable<S> &&
    requires(S s, const S cs, const JournalRecord& r, const json& j) {
      s.apply(r);
      { cs.to_json() } -> std::same_as<json>;
      { S::from_json(j) } -> std::same_as<S>;
    };

struct Snapshot {
  std::uint64_t as_of_seq = 0;
  json state = json::object();
};

std::string encode_snapshot(const Snapshot& snapshot);

// nullopt when the file content is malformed or its crc does not verify.
std::optional<Snapshot> decode_snapshot(std::string_view bytes);

std::filesystem::path snapshot_path(const std::filesystem::path& dir, std::uint64_t as_of_seq);

// Writes `snapshot-<as_of_seq>.snap` through a temp file and rename(2).
// Requires as_of_seq <= journal_last_seq.
std::filesystem::path write_snapshot(const std::filesystem::path& dir, const json& state,
                                     std::uint64_t as_of_seq, std::uint64_t journal_last_seq);

// Snapshot files in `dir`, newest (highest as_of_seq) first.
std::vector<std::pair<std::uint64_t, std::filesystem::path>> list_snapshots(
    const std::filesystem::path& dir);

// Removes all but the newest `keep` snapshots.
void prune_snapshots(const std::filesystem::path& dir, std::size_t keep);

std::string read_file(const std::filesystem::path& path);

// Applies every record of `bytes` to a genesis state.
template <ReplayableState S>
S replay(std::string_view bytes) {
  S state;
  for (const auto& record : parse_journal(bytes).records) state.apply(record);
  return state;
}

template <ReplayableState S>
struct Recovered {
  S state;
  std::uint64_t last_seq = 0;
  std::size_t journal_valid_bytes = 0;
  bool torn_tail = false;
  std::optional<std::uint64_t> snapshot_seq;

  std::uint64_t next_seq() const { return last_seq + 1; }
};

// Loads the newest snapshot that verifies and is covered by the journal, then
// replays the journal tail past it. Corrupt snapshots fall back to older ones
// or to full replay; a corrupt mid-journal record is fatal.
template <ReplayableState S>
Recovered<S> recover(const std::filesystem::path& dir) {
  Recovered<S> out;
  const auto journal_path = dir / kJournalFile;
  std::string bytes;
  if (std::filesystem::exists(journal_path)) bytes = read_file(journal_path);
  ParsedJournal parsed = parse_journal(bytes);
  if (parsed.warning) std::clog << "warning: " << *parsed.warning << '\n';
  out.last_seq = parsed.last_seq();
  out.journal_valid_bytes = parsed.valid_bytes;
  out.torn_tail = parsed.torn_tail;

  std::uint64_t from = 0;
  for (const auto& [seq, path] : list_snapshots(dir)) {
    if (seq > out.last_seq) continue;
    auto snapshot = decode_snapshot(read_file(path));
    if (!snapshot || snapshot->as_of_seq != seq) {
      std::clog << "warning: ignoring corrupt snapshot " << path.filename().string() << '\n';
      continue;
    }
    try {
      out.state = S::from_json(snapshot->state);
    } catch (const std::exception& e) {
      std::clog << "warning: ignoring unreadable snapshot " << path.filename().string() << ": "
                << e.what() << '\n';
      continue;
    }
    from = seq;
    out.snapshot_seq = seq;
    break;
  }
  for (const auto& record : parsed.records) {
    if (record.seq > from) out.state.apply(record);
  }
  return out;
}

}  // namespace bank::persistence
