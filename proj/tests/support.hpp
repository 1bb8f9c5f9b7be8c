#pragma once

// Shared fixtures and independent oracles for the test binaries. Oracles here
// read raw journal text with plain JSON parsing; they never call the library's
// own decoders.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "bank/auth.hpp"
#include "bank/env.hpp"

namespace bank::testing {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr std::int64_t kEpoch = 1'700'000'000'000;

// Manually advanced clock; copies share the same time.
class ManualClock {
 public:
  explicit ManualClock(std::int64_t start = kEpoch) : now_(std::make_shared<std::atomic<std::int64_t>>(start)) {}
  Clock clock() const {
    auto now = now_;
    return [now] { return now->load(); };
  }
  void advance(std::int64_t ms) { *now_ += ms; }
  void set(std::int64_t t) { *now_ = t; }
  std::int64_t now() const { return *now_; }

 private:
  std::shared_ptr<std::atomic<std::int64_t>> now_;
};

// Clock that moves one second forward on every read.
inline Clock ticking_clock(std::int64_t start = kEpoch) {
  auto t = std::make_shared<std::atomic<std::int64_t>>(start);
  return [t] { return t->fetch_add(1000); };
}

inline auth::Policy fast_policy() {
  auth::Policy p;
  p.hash_params = std::string(auth::kFastHashParams);
  return p;
}

// Bitwise CRC-32 (reflected, poly 0xEDB88320), no tables.
inline std::uint32_t reference_crc32(std::string_view bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (unsigned char c : bytes) {
    crc ^= c;
    for (int i = 0; i < 8; ++i) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

inline std::vector<std::string> split_lines(std::string_view bytes) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < bytes.size()) {
    auto nl = bytes.find('\n', start);
    if (nl == std::string_view::npos) {
      out.emplace_back(bytes.substr(start));
      break;
    }
    out.emplace_back(bytes.substr(start, nl - start));
    start = nl + 1;
  }
  return out;
}

// Journal lines parsed with nlohmann only.
inline std::vector<json> raw_records(std::string_view bytes) {
  std::vector<json> out;
  for (const auto& line : split_lines(bytes)) out.push_back(json::parse(line));
  return out;
}

inline std::vector<json> raw_transactions(std::string_view bytes) {
  std::vector<json> out;
  for (auto& r : raw_records(bytes)) {
    if (r.at("kind") == "TX_COMMITTED") out.push_back(r.at("payload"));
  }
  return out;
}

// Balance of every account touched by a posting: sum of credits minus debits.
inline std::map<std::string, std::int64_t> posting_sums(std::string_view bytes) {
  std::map<std::string, std::int64_t> sums;
  for (const auto& tx : raw_transactions(bytes)) {
    for (const auto& p : tx.at("postings")) {
      const auto amount = p.at("amount_minor").get<std::int64_t>();
      sums[p.at("account_id").get<std::string>()] += p.at("direction") == "CREDIT" ? amount : -amount;
    }
  }
  return sums;
}

// Every journal account id with its kind, from ACCOUNT_OPENED records.
inline std::map<std::string, std::string> raw_account_kinds(std::string_view bytes) {
  std::map<std::string, std::string> kinds;
  for (auto& r : raw_records(bytes)) {
    if (r.at("kind") == "ACCOUNT_OPENED") {
      kinds[r.at("payload").at("account_id").get<std::string>()] =
          r.at("payload").at("kind").get<std::string>();
    }
  }
  return kinds;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path = fs::temp_directory_path() /
           ("banktest-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
            std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace bank::testing
