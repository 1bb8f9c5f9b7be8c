#include <algorithm>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <regex>

#include "bank/error.hpp"
#include "bank/persistence/recovery.hpp"
#include "bank/services.hpp"

namespace bank::services {

namespace kind = persistence::kind;
using auth::Principal;
using auth::Role;
using ledger::Account;
using ledger::AccountKind;
using ledger::AccountStatus;
using ledger::Direction;
using ledger::Posting;
using ledger::TxKind;

namespace {

constexpr std::size_t kMaxReference = 40;
constexpr std::size_t kMaxReason = 140;
constexpr std::size_t kMaxNameLength = 120;

std::string format_id(std::string_view prefix, std::uint64_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*llu", width, static_cast<unsigned long long>(n));
  return std::string(prefix) + buf;
}

void require_idempotency_key(std::string_view key) {
  if (key.empty() || key.size() > ledger::kMaxIdempotencyKey) {
    fail(ErrorCode::Validation, "idempotency_key must be 1-64 characters");
  }
}

void require_positive(Money amount) {
  if (amount.minor <= 0) fail(ErrorCode::Validation, "amount_minor must be positive");
}

}  // namespace

bool valid_username(std::string_view username) {
  if (username.size() < 3 || username.size() > 32) return false;
  return std::all_of(username.begin(), username.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

bool valid_email(std::string_view email) {
  static const std::regex shape(R"([^@\s]+@[^@\s]+\.[^@\s.]+)");
  return std::regex_match(email.begin(), email.end(), shape);
}

bool valid_cheque_number(std::string_view number) {
  return number.size() == 6 &&
         std::all_of(number.begin(), number.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// ---- construction ----------------------------------------------------------

Bank::Bank(std::unique_ptr<persistence::RecordSink> sink, std::filesystem::path data_dir,
           BankState state, Clock clock, RandomSource random, auth::Policy policy,
           std::uint64_t snapshot_every)
    : sink_(std::move(sink)),
      data_dir_(std::move(data_dir)),
      clock_(clock),
      registry_(std::move(state.registry)),
      ledger_(*sink_, clock, std::move(state.book),
              [this](std::string_view id) { return registry_.find_customer(id) != nullptr; }),
      auth_(*sink_, clock, std::move(random), std::move(policy), std::move(state.credentials)),
      snapshot_every_(snapshot_every),
      last_snapshot_seq_(sink_->last_seq()) {}

Bank::~Bank() = default;

std::unique_ptr<Bank> Bank::open(BankOptions options) {
  std::filesystem::create_directories(options.data_dir);
  auto recovered = persistence::recover<BankState>(options.data_dir);
  auto journal = std::make_unique<persistence::Journal>(
      options.data_dir / persistence::kJournalFile, options.durability, recovered.last_seq,
      recovered.journal_valid_bytes);
  std::unique_ptr<Bank> bank(new Bank(std::move(journal), options.data_dir,
                                      std::move(recovered.state), std::move(options.clock),
                                      std::move(options.random), std::move(options.auth_policy),
                                      options.snapshot_every));
  bank->last_snapshot_seq_ = recovered.snapshot_seq.value_or(0);
  return bank;
}

std::unique_ptr<Bank> Bank::in_memory(Clock clock, RandomSource random, auth::Policy policy) {
  return std::unique_ptr<Bank>(new Bank(std::make_unique<persistence::MemoryJournal>(), {},
                                        BankState{}, std::move(clock), std::move(random),
                                        std::move(policy), 0));
}

// ---- helpers ---------------------------------------------------------------

Principal Bank::require_admin(std::string_view token) {
  Principal who = auth_.authenticate(token);
  if (who.role != Role::Admin) fail(ErrorCode::Forbidden, "administrator role required");
  return who;
}

Account Bank::owned_account(const Principal& who, std::string_view account,
                            bool allow_admin) const {
  return ledger_.read([&](const ledger::Book& book) {
    const Account* a = book.find_account(account);
    if (!a) fail(ErrorCode::UnknownAccount, "unknown account " + std::string(account));
    if (a->owner != who.id && !(allow_admin && who.role == Role::Admin)) {
      fail(ErrorCode::NotOwner, "account " + a->id + " does not belong to the caller");
    }
    return *a;
  });
}

std::optional<AccountId> Bank::vault() const {
  return ledger_.read([&](const ledger::Book& book) -> std::optional<AccountId> {
    for (const auto& a : book.accounts()) {
      if (a.kind == AccountKind::InternalSettlement && !registry_.biller_for_settlement(a.id)) {
        return a.id;
      }
    }
    return std::nullopt;
  });
}

AccountId Bank::ensure_vault() {
  if (auto v = vault()) return *v;
  return ledger_.open_account(ledger::kInternalOwner, AccountKind::InternalSettlement);
}

Receipt Bank::receipt_for(const ledger::Transaction& tx) const {
  Receipt r;
  r.tx_id = tx.tx_id;
  r.timestamp = tx.timestamp;
  r.kind = tx.kind;
  r.memo = tx.memo;
  for (const auto& p : tx.postings) {
    if (p.direction == Direction::Debit) {
      r.from_account = p.account_id;
      r.amount = p.amount;
    } else {
      const Biller* b = registry_.biller_for_settlement(p.account_id);
      r.counterparty = b ? b->id : p.account_id;
    }
  }
  return r;
}

void Bank::commit(std::string_view record_kind, json payload) {
  registry_.apply(sink_->append(record_kind, std::move(payload), clock_()));
}

void Bank::audit(const Principal& who, std::string_view operation, std::string_view subject) {
  sink_->append(kind::kAudit,
                {{"principal", who.id}, {"operation", operation}, {"outcome", "OK"},
                 {"subject", subject}},
                clock_());
}

void Bank::maybe_snapshot() {
  if (snapshot_every_ == 0 || data_dir_.empty()) return;
  if (sink_->last_seq() - last_snapshot_seq_ < snapshot_every_) return;
  const json state = auth_.exclusive([&](const auth::CredentialBook& creds) {
    return json{{"seq", sink_->last_seq()},
                {"state", BankState{ledger_.snapshot(), creds, registry_}.to_json()}};
  });
  try {
    const auto seq = state["seq"].get<std::uint64_t>();
    persistence::write_snapshot(data_dir_, state["state"], seq, seq);
    persistence::prune_snapshots(data_dir_, 2);
    last_snapshot_seq_ = seq;
  } catch (const BankError& e) {
    // The journal stays authoritative; retry at the next cadence point.
    std::clog << "warning: snapshot failed: " << e.what() << '\n';
    last_snapshot_seq_ = sink_->last_seq();
  }
}

// ---- sessions --------------------------------------------------------------

auth::Session Bank::login(std::string_view username, std::string_view password) {
  auto session = auth_.login(username, password);
  std::unique_lock lock(mu_);
  maybe_snapshot();
  return session;
}

void Bank::logout(std::string_view token) { auth_.logout(token); }

Principal Bank::authenticate(std::string_view token) { return auth_.authenticate(token); }

// ---- customer flows --------------------------------------------------------

Receipt Bank::pay_bill(std::string_view token, std::string_view from_account,
                       std::string_view biller_id, std::string_view reference, Money amount,
                       std::string_view idempotency_key) {
  const Principal who = auth_.authenticate(token);
  std::unique_lock lock(mu_);
  const Account from = owned_account(who, from_account, false);
  require_idempotency_key(idempotency_key);
  if (auto prior = ledger_.find_idempotent(who.id, idempotency_key)) return receipt_for(*prior);

  require_positive(amount);
  if (reference.empty() || reference.size() > kMaxReference) {
    fail(ErrorCode::Validation, "reference must be 1-40 characters");
  }
  const Biller* biller = registry_.find_biller(biller_id);
  if (!biller) fail(ErrorCode::UnknownBiller, "unknown biller " + std::string(biller_id));
  if (biller->status != BillerStatus::Active) {
    fail(ErrorCode::BillerRetired, "biller " + biller->id + " no longer accepts payments");
  }

  auto result = ledger_.post_transaction(
      TxKind::BillPayment,
      {Posting{from.id, Direction::Debit, amount},
       Posting{biller->settlement_account_id, Direction::Credit, amount}},
      biller->id + " ref " + std::string(reference), std::string(idempotency_key),
      ledger::Initiator{who.id, true});
  if (!result.replayed) {
    audit(who, "PAY_BILL", result.tx.tx_id);
    maybe_snapshot();
  }
  return receipt_for(result.tx);
}

Receipt Bank::transfer_funds(std::string_view token, std::string_view from_account,
                             std::string_view to_account, Money amount, std::string_view memo,
                             std::string_view idempotency_key) {
  const Principal who = auth_.authenticate(token);
  std::unique_lock lock(mu_);
  const Account from = owned_account(who, from_account, false);
  require_idempotency_key(idempotency_key);
  if (auto prior = ledger_.find_idempotent(who.id, idempotency_key)) return receipt_for(*prior);

  require_positive(amount);
  if (memo.size() > ledger::kMaxMemo) fail(ErrorCode::Validation, "memo exceeds 140 characters");
  if (from_account == to_account) fail(ErrorCode::SelfTransfer, "cannot transfer to the same account");
  const bool to_ok = ledger_.read([&](const ledger::Book& book) {
    const Account* to = book.find_account(to_account);
    return to && ledger::is_customer_kind(to->kind);
  });
  if (!to_ok) fail(ErrorCode::UnknownAccount, "unknown account " + std::string(to_account));

  auto result = ledger_.post_transaction(
      TxKind::Transfer,
      {Posting{from.id, Direction::Debit, amount},
       Posting{std::string(to_account), Direction::Credit, amount}},
      std::string(memo), std::string(idempotency_key), ledger::Initiator{who.id, true});
  if (!result.replayed) {
    audit(who, "TRANSFER", result.tx.tx_id);
    maybe_snapshot();
  }
  return receipt_for(result.tx);
}

ChequeBookRequest Bank::request_cheque_book(std::string_view token, std::string_view account,
                                            int leaves) {
  const Principal who = auth_.authenticate(token);
  std::unique_lock lock(mu_);
  const Account a = owned_account(who, account, false);
  if (leaves != 25 && leaves != 50 && leaves != 100) {
    fail(ErrorCode::Validation, "leaves must be 25, 50, or 100");
  }
  if (a.status != AccountStatus::Active) {
    fail(ErrorCode::Frozen, "account " + a.id + " is " + std::string(ledger::to_string(a.status)));
  }
  const std::string id = format_id("CHB-", registry_.cheque_requests().size() + 1, 6);
  commit(kind::kChequeRequest, {{"request_id", id},
                                {"account_id", a.id},
                                {"leaves", leaves},
                                {"requested_ts", clock_()}});
  audit(who, "REQUEST_CHEQUE_BOOK", id);
  maybe_snapshot();
  return *registry_.find_cheque_request(id);
}

StopChequeOrder Bank::stop_cheque(std::string_view token, std::string_view account,
                                  std::string_view cheque_number, std::string_view reason) {
  const Principal who = auth_.authenticate(token);
  std::unique_lock lock(mu_);
  const Account a = owned_account(who, account, false);
  if (!valid_cheque_number(cheque_number)) {
    fail(ErrorCode::Validation, "cheque_number must be 6 digits");
  }
  if (reason.size() > kMaxReason) fail(ErrorCode::Validation, "reason exceeds 140 characters");
  if (const StopChequeOrder* existing = registry_.find_active_stop(a.id, cheque_number)) {
    return *existing;
  }
  const std::string id = format_id("STP-", registry_.stop_orders().size() + 1, 6);
  commit(kind::kStopOrder, {{"order_id", id},
                            {"account_id", a.id},
                            {"cheque_number", cheque_number},
                            {"reason", reason}});
  audit(who, "STOP_CHEQUE", id);
  maybe_snapshot();
  return registry_.stop_orders().back();
}

StatementPage Bank::view_statement(std::string_view token, std::string_view account,
                                   const StatementQuery& query) {
  const Principal who = auth_.authenticate(token);
  std::shared_lock lock(mu_);
  const Account a = owned_account(who, account, true);
  const auto page = ledger_.list_postings(a.id, query);
  StatementPage out;
  out.next_cursor = page.next_cursor;
  out.lines.reserve(page.items.size());
  for (const auto& p : page.items) {
    out.lines.push_back(
        StatementLine{p.tx_id, p.timestamp, p.kind, p.signed_amount, p.running_balance, p.memo});
  }
  return out;
}

void Bank::change_password(std::string_view token, std::string_view old_password,
                           std::string_view new_password) {
  const Principal who = auth_.authenticate(token);
  if (new_password.size() < auth::kMinPasswordLength) {
    fail(ErrorCode::Validation, "new password must be at least 8 characters");
  }
  if (!auth_.verify_password(who.id, old_password)) {
    fail(ErrorCode::BadCredentials, "current password is incorrect");
  }
  std::unique_lock lock(mu_);
  const std::string username = auth_.exclusive([&](const auth::CredentialBook& creds) {
    return creds.find(who.id)->username;
  });
  auth_.set_password(who.id, username, who.role, new_password);
  auth_.invalidate_sessions(who.id, token);
  audit(who, "CHANGE_PASSWORD", who.id);
  maybe_snapshot();
}

CustomerProfile Bank::update_contact(std::string_view token, const ContactUpdate& update) {
  const Principal who = auth_.authenticate(token);
  if (who.role != Role::Customer) fail(ErrorCode::Forbidden, "only customers have a contact profile");
  if (!update.email && !update.phone && !update.postal_address) {
    fail(ErrorCode::Validation, "at least one contact field is required");
  }
  if (update.email && !valid_email(*update.email)) {
    fail(ErrorCode::Validation, "email is not a valid address");
  }
  std::unique_lock lock(mu_);
  json payload = {{"customer_id", who.id}};
  if (update.email) payload["email"] = *update.email;
  if (update.phone) payload["phone"] = *update.phone;
  if (update.postal_address) payload["postal_address"] = *update.postal_address;
  commit(kind::kProfileUpdated, std::move(payload));
  audit(who, "UPDATE_CONTACT", who.id);
  maybe_snapshot();
  return *registry_.find_customer(who.id);
}

// ---- reads -----------------------------------------------------------------

std::vector<Account> Bank::list_accounts(std::string_view token) {
  const Principal who = auth_.authenticate(token);
  std::shared_lock lock(mu_);
  return ledger_.read([&](const ledger::Book& book) {
    std::vector<Account> out;
    for (const auto& a : book.accounts()) {
      if (who.role == Role::Admin || a.owner == who.id) out.push_back(a);
    }
    return out;
  });
}

Money Bank::balance(std::string_view token, std::string_view account) {
  const Principal who = auth_.authenticate(token);
  std::shared_lock lock(mu_);
  return owned_account(who, account, true).balance;
}

std::vector<Biller> Bank::list_billers(std::string_view token) {
  auth_.authenticate(token);
  std::shared_lock lock(mu_);
  std::vector<Biller> out;
  for (const auto& b : registry_.billers()) {
    if (b.status == BillerStatus::Active) out.push_back(b);
  }
  return out;
}

// ---- admin -----------------------------------------------------------------

CustomerProfile Bank::admin_create_customer(std::string_view token, const NewCustomer& profile,
                                            std::string_view initial_password) {
  const Principal who = require_admin(token);
  if (!valid_username(profile.username)) {
    fail(ErrorCode::Validation, "username must be 3-32 characters of a-z, 0-9, _");
  }
  if (profile.full_name.empty() || profile.full_name.size() > kMaxNameLength) {
    fail(ErrorCode::Validation, "full_name must be 1-120 characters");
  }
  if (!profile.email.empty() && !valid_email(profile.email)) {
    fail(ErrorCode::Validation, "email is not a valid address");
  }
  if (initial_password.size() < auth::kMinPasswordLength) {
    fail(ErrorCode::Validation, "password must be at least 8 characters");
  }
  std::unique_lock lock(mu_);
  if (auth_.username_taken(profile.username)) {
    fail(ErrorCode::DuplicateUsername, "username '" + profile.username + "' is taken");
  }
  const std::string id = format_id("CUS-", registry_.customers().size() + 1, 6);
  CustomerProfile created{id, profile.username, profile.full_name, profile.email, profile.phone,
                          profile.postal_address};
  commit(kind::kCustomerCreated, to_json(created));
  auth_.set_password(id, profile.username, Role::Customer, initial_password);
  audit(who, "CREATE_CUSTOMER", id);
  maybe_snapshot();
  return created;
}

Account Bank::admin_open_funded_account(std::string_view token, std::string_view customer_id,
                                        AccountKind kind, Money opening_deposit) {
  const Principal who = require_admin(token);
  if (!ledger::is_customer_kind(kind)) {
    fail(ErrorCode::Validation, "customer accounts must be CUSTOMER_CHECKING or CUSTOMER_SAVINGS");
  }
  if (opening_deposit.minor < 0) fail(ErrorCode::Validation, "opening deposit must not be negative");
  std::unique_lock lock(mu_);
  if (!registry_.find_customer(customer_id)) {
    fail(ErrorCode::UnknownCustomer, "unknown customer " + std::string(customer_id));
  }
  const AccountId vault_id = ensure_vault();
  const AccountId id = ledger_.open_account(customer_id, kind);
  if (opening_deposit.minor > 0) {
    ledger_.post_transaction(TxKind::InitialFunding,
                             {Posting{vault_id, Direction::Debit, opening_deposit},
                              Posting{id, Direction::Credit, opening_deposit}},
                             "opening deposit", std::nullopt, ledger::Initiator{who.id, false});
  }
  audit(who, "OPEN_ACCOUNT", id);
  maybe_snapshot();
  return ledger_.account(id);
}

Biller Bank::admin_register_biller(std::string_view token, std::string_view name) {
  const Principal who = require_admin(token);
  if (name.empty() || name.size() > kMaxNameLength) {
    fail(ErrorCode::Validation, "biller name must be 1-120 characters");
  }
  std::unique_lock lock(mu_);
  ensure_vault();
  const AccountId settlement =
      ledger_.open_account(ledger::kInternalOwner, AccountKind::InternalSettlement);
  const std::string id = format_id("BIL-", registry_.billers().size() + 1, 4);
  commit(kind::kBillerRegistered,
         {{"biller_id", id}, {"name", name}, {"settlement_account_id", settlement}});
  audit(who, "REGISTER_BILLER", id);
  maybe_snapshot();
  return *registry_.find_biller(id);
}

Biller Bank::admin_retire_biller(std::string_view token, std::string_view biller_id) {
  const Principal who = require_admin(token);
  std::unique_lock lock(mu_);
  const Biller* b = registry_.find_biller(biller_id);
  if (!b) fail(ErrorCode::UnknownBiller, "unknown biller " + std::string(biller_id));
  if (b->status == BillerStatus::Retired) return *b;
  commit(kind::kBillerStatus, {{"biller_id", b->id}, {"status", "RETIRED"}});
  audit(who, "RETIRE_BILLER", b->id);
  maybe_snapshot();
  return *registry_.find_biller(biller_id);
}

ChequeBookRequest Bank::admin_decide_cheque_request(std::string_view token,
                                                    std::string_view request_id,
                                                    ChequeRequestStatus decision) {
  const Principal who = require_admin(token);
  if (decision == ChequeRequestStatus::Pending) {
    fail(ErrorCode::Validation, "decision must be APPROVED or REJECTED");
  }
  std::unique_lock lock(mu_);
  const ChequeBookRequest* r = registry_.find_cheque_request(request_id);
  if (!r) fail(ErrorCode::UnknownRequest, "unknown cheque request " + std::string(request_id));
  if (r->status != ChequeRequestStatus::Pending) {
    fail(ErrorCode::AlreadyDecided, "cheque request " + r->id + " was already decided");
  }
  commit(kind::kChequeDecision,
         {{"request_id", r->id}, {"status", to_string(decision)}, {"decided_ts", clock_()}});
  audit(who, "DECIDE_CHEQUE_REQUEST", request_id);
  maybe_snapshot();
  return *registry_.find_cheque_request(request_id);
}

Account Bank::admin_set_account_status(std::string_view token, std::string_view account,
                                       AccountStatus status) {
  const Principal who = require_admin(token);
  std::unique_lock lock(mu_);
  Account a = ledger_.set_account_status(account, status);
  audit(who, "SET_ACCOUNT_STATUS", a.id);
  maybe_snapshot();
  return a;
}

std::string Bank::bootstrap_admin(std::string_view username, std::string_view password) {
  if (!valid_username(username)) {
    fail(ErrorCode::Validation, "username must be 3-32 characters of a-z, 0-9, _");
  }
  if (password.size() < auth::kMinPasswordLength) {
    fail(ErrorCode::Validation, "password must be at least 8 characters");
  }
  std::unique_lock lock(mu_);
  auto existing = auth_.exclusive([&](const auth::CredentialBook& creds) {
    const auth::Credential* c = creds.find_by_username(username);
    return c ? std::optional<std::pair<std::string, Role>>({c->principal_id, c->role})
             : std::nullopt;
  });
  if (existing) {
    if (existing->second != Role::Admin) {
      fail(ErrorCode::DuplicateUsername, "username '" + std::string(username) + "' is a customer");
    }
    return existing->first;
  }
  const std::string id = auth_.exclusive([&](const auth::CredentialBook& creds) {
    return format_id("ADM-", creds.admin_count() + 1, 6);
  });
  auth_.set_password(id, username, Role::Admin, password);
  audit(Principal{id, Role::Admin}, "BOOTSTRAP_ADMIN", id);
  maybe_snapshot();
  return id;
}

// ---- operations ------------------------------------------------------------

std::uint64_t Bank::last_seq() const { return sink_->last_seq(); }

std::pair<std::uint64_t, json> Bank::state() const {
  std::unique_lock lock(mu_);
  return auth_.exclusive([&](const auth::CredentialBook& creds) {
    return std::pair{sink_->last_seq(), BankState{ledger_.snapshot(), creds, registry_}.to_json()};
  });
}

std::uint64_t Bank::write_snapshot() {
  if (data_dir_.empty()) fail(ErrorCode::StorageFailure, "no data directory");
  auto [seq, state] = this->state();
  persistence::write_snapshot(data_dir_, state, seq, sink_->last_seq());
  std::unique_lock lock(mu_);
  last_snapshot_seq_ = std::max(last_snapshot_seq_, seq);
  return seq;
}

std::string Bank::journal_bytes() const {
  if (auto* mem = dynamic_cast<const persistence::MemoryJournal*>(sink_.get())) return mem->bytes();
  return persistence::read_file(data_dir_ / persistence::kJournalFile);
}

}  // namespace bank::services
