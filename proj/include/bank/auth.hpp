#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bank/env.hpp"
#include "bank/persistence/journal.hpp"

namespace bank::auth {

using persistence::json;
using persistence::JournalRecord;

enum class Role { Customer, Admin };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);

// A named PBKDF2-HMAC-SHA256 cost setting.
struct HashParams {
  std::string_view name;
  int iterations;
};

inline constexpr std::string_view kDefaultHashParams = "pbkdf2-sha256-600k";
// Cheap setting for test suites.
inline constexpr std::string_view kFastHashParams = "pbkdf2-sha256-1k";

// Throws VALIDATION for names outside the configured set.
const HashParams& hash_params(std::string_view name);

inline constexpr std::size_t kSaltBytes = 16;
inline constexpr std::size_t kHashBytes = 32;
inline constexpr std::size_t kTokenBytes = 32;
inline constexpr std::size_t kMinPasswordLength = 8;

// Deterministic for fixed inputs. Throws VALIDATION for an empty password.
std::vector<std::uint8_t> hash_password(std::string_view password,
                                        std::span<const std::uint8_t> salt,
                                        const HashParams& params);

std::vector<std::uint8_t> from_hex(std::string_view hex);

struct Credential {
  std::string principal_id;
  std::string username;
  Role role = Role::Customer;
  std::vector<std::uint8_t> salt;
  std::vector<std::uint8_t> password_hash;
  std::string hash_params;

  // Recomputes the hash and compares in constant time.
  bool verify(std::string_view password) const;
};

struct LockoutState {
  int failed_count = 0;
  std::optional<std::int64_t> locked_until;

  friend bool operator==(const LockoutState&, const LockoutState&) = default;
};

struct Policy {
  int lockout_threshold = 5;
  std::int64_t lockout_window_ms = 900'000;
  std::int64_t idle_ttl_ms = 900'000;
  std::string hash_params{kDefaultHashParams};
};

// Replayable credential and lockout state. Lockout counters travel inside
// LOGIN audit records so replay needs no policy.
class CredentialBook {
 public:
  void apply(const JournalRecord& record);
  json to_json() const;
  static CredentialBook from_json(const json& j);

  const Credential* find_by_username(std::string_view username) const;
  const Credential* find(std::string_view principal_id) const;
  LockoutState lockout(std::string_view principal_id) const;
  std::size_t admin_count() const;

 private:
  std::map<std::string, Credential, std::less<>> by_principal_;
  std::map<std::string, std::string, std::less<>> principal_by_username_;
  std::map<std::string, LockoutState, std::less<>> lockout_;
};

struct Principal {
  std::string id;
  Role role = Role::Customer;
};

struct Session {
  std::string token;  // 64 lowercase hex chars
  std::string principal_id;
  Role role = Role::Customer;
  std::int64_t created_ts = 0;
  std::int64_t last_used_ts = 0;
  std::int64_t idle_ttl_ms = 0;
};

class Auth {
 public:
  Auth(persistence::RecordSink& sink, Clock clock, RandomSource random, Policy policy,
       CredentialBook book = {});

  // BAD_CREDENTIALS for unknown user or wrong password (same message);
  // LOCKED_OUT while the lockout window is open.
  Session login(std::string_view username, std::string_view password);

  // UNAUTHENTICATED for unknown, expired, or logged-out tokens. Slides the TTL.
  Principal authenticate(std::string_view token);

  // Always succeeds.
  void logout(std::string_view token);

  // Journals a CREDENTIAL_SET with a fresh salt. Caller validates policy.
  void set_password(std::string_view principal_id, std::string_view username, Role role,
                    std::string_view password);

  bool verify_password(std::string_view principal_id, std::string_view password) const;

  // Drops every session of `principal_id` except `keep_token`.
  void invalidate_sessions(std::string_view principal_id, std::string_view keep_token);

  bool username_taken(std::string_view username) const;

  const Policy& policy() const { return policy_; }

  // Runs `f(const CredentialBook&)` holding the write lock, so no auth record
  // can be journaled meanwhile.
  template <typename F>
  decltype(auto) exclusive(F&& f) const {
    std::unique_lock lock(mu_);
    return std::forward<F>(f)(book_);
  }

 private:
  void record_login(std::string_view principal, std::string_view outcome,
                    const LockoutState& state, std::int64_t now);
  std::string new_token();

  persistence::RecordSink& sink_;
  Clock clock_;
  RandomSource random_;
  Policy policy_;
  mutable std::shared_mutex mu_;
  CredentialBook book_;

  std::mutex sessions_mu_;
  std::unordered_map<std::string, Session> sessions_;
};

}  // namespace bank::auth
