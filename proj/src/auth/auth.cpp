#include "bank/auth.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <array>

#include "bank/error.hpp"

namespace bank::auth {

namespace kind = persistence::kind;

namespace {

constexpr HashParams kParamSets[] = {
    {kDefaultHashParams, 600'000},
    {kFastHashParams, 1'000},
};

constexpr std::string_view kAnonymous = "ANONYMOUS";
constexpr std::string_view kBadCredentials = "invalid username or password";

}  // namespace

std::string_view to_string(Role r) { return r == Role::Admin ? "ADMIN" : "CUSTOMER"; }

Role parse_role(std::string_view s) {
  if (s == "ADMIN") return Role::Admin;
  if (s == "CUSTOMER") return Role::Customer;
  fail(ErrorCode::Validation, "unknown role '" + std::string(s) + "'");
}

const HashParams& hash_params(std::string_view name) {
  for (const auto& p : kParamSets) {
    if (p.name == name) return p;
  }
  fail(ErrorCode::Validation, "unknown hash parameter set '" + std::string(name) + "'");
}

std::vector<std::uint8_t> hash_password(std::string_view password,
                                        std::span<const std::uint8_t> salt,
                                        const HashParams& params) {
  if (password.empty()) fail(ErrorCode::Validation, "password must not be empty");
  std::vector<std::uint8_t> out(kHashBytes);
  if (PKCS5_PBKDF2_HMAC(password.data(), static_cast<int>(password.size()), salt.data(),
                        static_cast<int>(salt.size()), params.iterations, EVP_sha256(),
                        static_cast<int>(out.size()), out.data()) != 1) {
    fail(ErrorCode::Internal, "PBKDF2 failed");
  }
  return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw std::runtime_error("odd-length hex");
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw std::runtime_error("bad hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

bool Credential::verify(std::string_view password) const {
  // An empty password still pays for one hash so timing does not single it out.
  const auto computed =
      hash_password(password.empty() ? "-" : password, salt, auth::hash_params(hash_params));
  return !password.empty() && computed.size() == password_hash.size() &&
         CRYPTO_memcmp(computed.data(), password_hash.data(), computed.size()) == 0;
}

// ---- CredentialBook --------------------------------------------------------

namespace {

json credential_json(const Credential& c) {
  return {{"principal_id", c.principal_id}, {"username", c.username},
          {"role", to_string(c.role)},      {"salt", to_hex(c.salt)},
          {"password_hash", to_hex(c.password_hash)}, {"hash_params", c.hash_params}};
}

Credential credential_from_json(const json& j) {
  Credential c;
  c.principal_id = j.at("principal_id").get<std::string>();
  c.username = j.at("username").get<std::string>();
  c.role = parse_role(j.at("role").get<std::string>());
  c.salt = from_hex(j.at("salt").get<std::string>());
  c.password_hash = from_hex(j.at("password_hash").get<std::string>());
  c.hash_params = j.at("hash_params").get<std::string>();
  return c;
}

}  // namespace

void CredentialBook::apply(const JournalRecord& record) {
  if (record.kind == kind::kCredentialSet) {
    Credential c = credential_from_json(record.payload);
    principal_by_username_[c.username] = c.principal_id;
    by_principal_[c.principal_id] = std::move(c);
  } else if (record.kind == kind::kAudit && record.payload.value("operation", "") == "LOGIN") {
    const auto& p = record.payload;
    const std::string principal = p.at("principal").get<std::string>();
    if (principal == kAnonymous) return;
    LockoutState s;
    s.failed_count = p.at("failed_count").get<int>();
    if (p.contains("locked_until")) s.locked_until = p["locked_until"].get<std::int64_t>();
    if (s == LockoutState{}) lockout_.erase(principal);
    else lockout_[principal] = s;
  }
}

json CredentialBook::to_json() const {
  json creds = json::array();
  for (const auto& [_, c] : by_principal_) creds.push_back(credential_json(c));
  json lockouts = json::array();
  for (const auto& [principal, s] : lockout_) {
    json l = {{"principal_id", principal}, {"failed_count", s.failed_count}};
    if (s.locked_until) l["locked_until"] = *s.locked_until;
    lockouts.push_back(std::move(l));
  }
  return {{"credentials", std::move(creds)}, {"lockouts", std::move(lockouts)}};
}

CredentialBook CredentialBook::from_json(const json& j) {
  CredentialBook book;
  for (const auto& c : j.at("credentials")) {
    Credential cred = credential_from_json(c);
    book.principal_by_username_[cred.username] = cred.principal_id;
    book.by_principal_[cred.principal_id] = std::move(cred);
  }
  for (const auto& l : j.at("lockouts")) {
    LockoutState s;
    s.failed_count = l.at("failed_count").get<int>();
    if (l.contains("locked_until")) s.locked_until = l["locked_until"].get<std::int64_t>();
    book.lockout_[l.at("principal_id").get<std::string>()] = s;
  }
  return book;
}

const Credential* CredentialBook::find_by_username(std::string_view username) const {
  auto it = principal_by_username_.find(username);
  return it == principal_by_username_.end() ? nullptr : find(it->second);
}

const Credential* CredentialBook::find(std::string_view principal_id) const {
  auto it = by_principal_.find(principal_id);
  return it == by_principal_.end() ? nullptr : &it->second;
}

LockoutState CredentialBook::lockout(std::string_view principal_id) const {
  auto it = lockout_.find(principal_id);
  return it == lockout_.end() ? LockoutState{} : it->second;
}

std::size_t CredentialBook::admin_count() const {
  std::size_t n = 0;
  for (const auto& [_, c] : by_principal_) n += c.role == Role::Admin;
  return n;
}

// ---- Auth ------------------------------------------------------------------

Auth::Auth(persistence::RecordSink& sink, Clock clock, RandomSource random, Policy policy,
           CredentialBook book)
    : sink_(sink),
      clock_(std::move(clock)),
      random_(std::move(random)),
      policy_(std::move(policy)),
      book_(std::move(book)) {
  (void)hash_params(policy_.hash_params);
}

void Auth::record_login(std::string_view principal, std::string_view outcome,
                        const LockoutState& state, std::int64_t now) {
  json payload = {{"principal", principal},
                  {"operation", "LOGIN"},
                  {"outcome", outcome},
                  {"failed_count", state.failed_count}};
  if (state.locked_until) payload["locked_until"] = *state.locked_until;
  book_.apply(sink_.append(kind::kAudit, std::move(payload), now));
}

std::string Auth::new_token() {
  std::array<std::uint8_t, kTokenBytes> raw{};
  random_(raw);
  return to_hex(raw);
}

Session Auth::login(std::string_view username, std::string_view password) {
  std::optional<Credential> cred;
  {
    std::shared_lock lock(mu_);
    if (const Credential* c = book_.find_by_username(username)) cred = *c;
  }

  // The hash runs outside the lock; unknown users pay the same cost.
  bool ok = false;
  if (cred) {
    ok = cred->verify(password);
  } else {
    static const std::array<std::uint8_t, kSaltBytes> dummy_salt{};
    (void)hash_password(password.empty() ? "-" : password, dummy_salt,
                        hash_params(policy_.hash_params));
  }

  std::unique_lock lock(mu_);
  const std::int64_t now = clock_();
  if (!cred) {
    record_login(kAnonymous, "BAD_CREDENTIALS", LockoutState{}, now);
    fail(ErrorCode::BadCredentials, std::string(kBadCredentials));
  }
  LockoutState state = book_.lockout(cred->principal_id);
  if (state.locked_until) {
    if (now < *state.locked_until) {
      record_login(cred->principal_id, "LOCKED_OUT", state, now);
      fail(ErrorCode::LockedOut, "too many failed logins; try again later");
    }
    state = LockoutState{};  // window elapsed
  }
  if (!ok) {
    ++state.failed_count;
    if (state.failed_count >= policy_.lockout_threshold) {
      state.locked_until = now + policy_.lockout_window_ms;
    }
    record_login(cred->principal_id, "BAD_CREDENTIALS", state, now);
    fail(ErrorCode::BadCredentials, std::string(kBadCredentials));
  }
  record_login(cred->principal_id, "OK", LockoutState{}, now);

  Session s{new_token(), cred->principal_id, cred->role, now, now, policy_.idle_ttl_ms};
  std::lock_guard slock(sessions_mu_);
  sessions_[s.token] = s;
  return s;
}

Principal Auth::authenticate(std::string_view token) {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(std::string(token));
  if (it == sessions_.end()) fail(ErrorCode::Unauthenticated, "missing or invalid session");
  const std::int64_t now = clock_();
  if (now - it->second.last_used_ts > it->second.idle_ttl_ms) {
    sessions_.erase(it);
    fail(ErrorCode::Unauthenticated, "missing or invalid session");
  }
  it->second.last_used_ts = now;
  return Principal{it->second.principal_id, it->second.role};
}

void Auth::logout(std::string_view token) {
  std::lock_guard lock(sessions_mu_);
  sessions_.erase(std::string(token));
}

void Auth::set_password(std::string_view principal_id, std::string_view username, Role role,
                        std::string_view password) {
  Credential c;
  c.principal_id = principal_id;
  c.username = username;
  c.role = role;
  c.salt.resize(kSaltBytes);
  random_(c.salt);
  c.hash_params = policy_.hash_params;
  c.password_hash = hash_password(password, c.salt, hash_params(c.hash_params));

  std::unique_lock lock(mu_);
  book_.apply(sink_.append(kind::kCredentialSet, credential_json(c), clock_()));
}

bool Auth::verify_password(std::string_view principal_id, std::string_view password) const {
  std::optional<Credential> cred;
  {
    std::shared_lock lock(mu_);
    if (const Credential* c = book_.find(principal_id)) cred = *c;
  }
  return cred && cred->verify(password);
}

void Auth::invalidate_sessions(std::string_view principal_id, std::string_view keep_token) {
  std::lock_guard lock(sessions_mu_);
  std::erase_if(sessions_, [&](const auto& kv) {
    return kv.second.principal_id == principal_id && kv.first != keep_token;
  });
}

bool Auth::username_taken(std::string_view username) const {
  std::shared_lock lock(mu_);
  return book_.find_by_username(username) != nullptr;
}

}  // namespace bank::auth
