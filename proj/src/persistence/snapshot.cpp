#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bank/error.hpp"
#include "bank/persistence/recovery.hpp"

namespace bank::persistence {

namespace fs = std::filesystem;

std::string encode_snapshot(const Snapshot& snapshot) {
  json body = {{"as_of_seq", snapshot.as_of_seq}, {"state", snapshot.state}};
  return seal(body, "snapshot_crc") + "\n";
}

std::optional<Snapshot> decode_snapshot(std::string_view bytes) {
  if (bytes.empty() || bytes.back() != '\n') return std::nullopt;
  bytes.remove_suffix(1);
  auto body = unseal(bytes, "snapshot_crc");
  if (!body || !body->contains("as_of_seq") || !(*body)["as_of_seq"].is_number_unsigned() ||
      !body->contains("state")) {
    return std::nullopt;
  }
  return Snapshot{(*body)["as_of_seq"].get<std::uint64_t>(), (*body)["state"]};
}

fs::path snapshot_path(const fs::path& dir, std::uint64_t as_of_seq) {
  return dir / ("snapshot-" + std::to_string(as_of_seq) + ".snap");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::StorageFailure, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

fs::path write_snapshot(const fs::path& dir, const json& state, std::uint64_t as_of_seq,
                        std::uint64_t journal_last_seq) {
  if (as_of_seq > journal_last_seq) {
    fail(ErrorCode::Validation, "snapshot seq " + std::to_string(as_of_seq) +
                                    " is beyond journal end " + std::to_string(journal_last_seq));
  }
  const std::string data = encode_snapshot(Snapshot{as_of_seq, state});
  const fs::path final_path = snapshot_path(dir, as_of_seq);
  fs::path tmp = final_path;
  tmp += ".tmp";

  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) fail(ErrorCode::StorageFailure, "open " + tmp.string() + ": " + std::strerror(errno));
  std::size_t written = 0;
  bool ok = true;
  while (ok && written < data.size()) {
    const ssize_t n = ::write(fd, data.data() + written, data.size() - written);
    if (n < 0 && errno == EINTR) continue;
    if (n < 0) ok = false;
    else written += static_cast<std::size_t>(n);
  }
  ok = ok && ::fsync(fd) == 0;
  const int saved = errno;
  ::close(fd);
  if (!ok || ::rename(tmp.c_str(), final_path.c_str()) != 0) {
    const int err = ok ? errno : saved;
    std::error_code ignored;
    fs::remove(tmp, ignored);
    fail(ErrorCode::StorageFailure, "write snapshot " + final_path.string() + ": " + std::strerror(err));
  }
  if (const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC); dfd >= 0) {
    (void)::fsync(dfd);
    ::close(dfd);
  }
  return final_path;
}

std::vector<std::pair<std::uint64_t, fs::path>> list_snapshots(const fs::path& dir) {
  std::vector<std::pair<std::uint64_t, fs::path>> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const std::string name = entry.path().filename().string();
    constexpr std::string_view prefix = "snapshot-";
    constexpr std::string_view suffix = ".snap";
    if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) ||
        !name.ends_with(suffix)) {
      continue;
    }
    const std::string digits =
        name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
    out.emplace_back(std::stoull(digits), entry.path());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  return out;
}

void prune_snapshots(const fs::path& dir, std::size_t keep) {
  auto all = list_snapshots(dir);
  for (std::size_t i = keep; i < all.size(); ++i) {
    std::error_code ignored;
    fs::remove(all[i].second, ignored);
  }
}

}  // namespace bank::persistence
