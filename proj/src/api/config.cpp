#include <charconv>
#include <sstream>

#include "bank/api.hpp"

namespace bank::api {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T positive(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || out <= 0) {
    fail(ErrorCode::Validation,
         "config " + std::string(key) + " must be a positive integer, got '" + std::string(value) + "'");
  }
  return out;
}

}  // namespace

void apply_setting(ServerConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "listen_port") {
    c.listen_port = positive<int>(key, value);
    if (c.listen_port > 65535) fail(ErrorCode::Validation, "config listen_port out of range");
  } else if (key == "bind_address") {
    c.bind_address = value;
  } else if (key == "data_dir") {
    if (value.empty()) fail(ErrorCode::Validation, "config data_dir must not be empty");
    c.data_dir = std::string(value);
  } else if (key == "session_idle_ttl_s") {
    c.session_idle_ttl_s = positive<std::int64_t>(key, value);
  } else if (key == "lockout_threshold") {
    c.lockout_threshold = positive<int>(key, value);
  } else if (key == "lockout_window_s") {
    c.lockout_window_s = positive<std::int64_t>(key, value);
  } else if (key == "snapshot_every") {
    c.snapshot_every = positive<std::uint64_t>(key, value);
  } else if (key == "currency_code") {
    if (value.empty()) fail(ErrorCode::Validation, "config currency_code must not be empty");
    c.currency_code = value;
  } else if (key == "hash_params") {
    (void)auth::hash_params(value);
    c.hash_params = value;
  } else {
    fail(ErrorCode::Validation, "unknown config key '" + std::string(key) + "'");
  }
}

ServerConfig parse_config(std::string_view text) {
  ServerConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view l = line;
    if (auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    l = trim(l);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::Validation, "config line " + std::to_string(number) + ": expected key = value");
    }
    apply_setting(config, l.substr(0, eq), l.substr(eq + 1));
  }
  return config;
}

services::BankOptions bank_options(const ServerConfig& config) {
  services::BankOptions o;
  o.data_dir = config.data_dir;
  o.auth_policy.lockout_threshold = config.lockout_threshold;
  o.auth_policy.lockout_window_ms = config.lockout_window_s * 1000;
  o.auth_policy.idle_ttl_ms = config.session_idle_ttl_s * 1000;
  o.auth_policy.hash_params = config.hash_params;
  o.snapshot_every = config.snapshot_every;
  return o;
}

}  // namespace bank::api
