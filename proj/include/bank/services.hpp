#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "bank/auth.hpp"
#include "bank/env.hpp"
#include "bank/ledger.hpp"
#include "bank/persistence/journal.hpp"

namespace bank::services {

using ledger::AccountId;
using ledger::Money;
using persistence::json;
using persistence::JournalRecord;

struct CustomerProfile {
  std::string id;  // CUS-000001
  std::string username;
  std::string full_name;
  std::string email;
  std::string phone;
  std::string postal_address;

  friend bool operator==(const CustomerProfile&, const CustomerProfile&) = default;
};

enum class BillerStatus { Active, Retired };

struct Biller {
  std::string id;  // BIL-0001
  std::string name;
  AccountId settlement_account_id;
  BillerStatus status = BillerStatus::Active;
};

enum class ChequeRequestStatus { Pending, Approved, Rejected };

struct ChequeBookRequest {
  std::string id;  // CHB-000001
  AccountId account_id;
  int leaves = 25;
  ChequeRequestStatus status = ChequeRequestStatus::Pending;
  std::int64_t requested_ts = 0;
  std::optional<std::int64_t> decided_ts;
};

enum class StopOrderStatus { Active, Cancelled };

struct StopChequeOrder {
  std::string id;  // STP-000001
  AccountId account_id;
  std::string cheque_number;
  std::string reason;
  StopOrderStatus status = StopOrderStatus::Active;
};

struct Receipt {
  ledger::TxId tx_id;
  std::int64_t timestamp = 0;
  ledger::TxKind kind = ledger::TxKind::Transfer;
  Money amount;
  AccountId from_account;
  std::string counterparty;  // biller id or account id
  std::string memo;

  friend bool operator==(const Receipt&, const Receipt&) = default;
};

using StatementQuery = ledger::PostingQuery;

struct StatementLine {
  ledger::TxId tx_id;
  std::int64_t timestamp = 0;
  ledger::TxKind kind = ledger::TxKind::Transfer;
  Money amount;  // credit positive
  Money running_balance;
  std::string memo;
};

struct StatementPage {
  std::vector<StatementLine> lines;
  std::optional<ledger::TxId> next_cursor;
};

struct NewCustomer {
  std::string username;
  std::string full_name;
  std::string email;
  std::string phone;
  std::string postal_address;
};

struct ContactUpdate {
  std::optional<std::string> email;
  std::optional<std::string> phone;
  std::optional<std::string> postal_address;
};

std::string_view to_string(BillerStatus s);
std::string_view to_string(ChequeRequestStatus s);
std::string_view to_string(StopOrderStatus s);
ChequeRequestStatus parse_cheque_status(std::string_view s);

json to_json(const CustomerProfile& p);
json to_json(const Biller& b);
json to_json(const ChequeBookRequest& r);
json to_json(const StopChequeOrder& o);

// Workflow entities and customer profiles, rebuilt from the journal.
class Registry {
 public:
  void apply(const JournalRecord& record);
  json to_json() const;
  static Registry from_json(const json& j);

  const CustomerProfile* find_customer(std::string_view id) const;
  const Biller* find_biller(std::string_view id) const;
  const Biller* biller_for_settlement(std::string_view account) const;
  const ChequeBookRequest* find_cheque_request(std::string_view id) const;
  const StopChequeOrder* find_active_stop(std::string_view account,
                                          std::string_view cheque_number) const;
  const std::vector<Biller>& billers() const { return billers_; }
  const std::vector<CustomerProfile>& customers() const { return customers_; }
  const std::vector<ChequeBookRequest>& cheque_requests() const { return cheque_requests_; }
  const std::vector<StopChequeOrder>& stop_orders() const { return stop_orders_; }

 private:
  std::vector<CustomerProfile> customers_;
  std::vector<Biller> billers_;
  std::vector<ChequeBookRequest> cheque_requests_;
  std::vector<StopChequeOrder> stop_orders_;
  std::map<AccountId, std::size_t, std::less<>> biller_by_settlement_;
};

// Everything recovery rebuilds.
struct BankState {
  ledger::Book book;
  auth::CredentialBook credentials;
  Registry registry;

  void apply(const JournalRecord& record);
  json to_json() const;
  static BankState from_json(const json& j);
};

struct BankOptions {
  std::filesystem::path data_dir;
  persistence::Durability durability = persistence::Durability::Sync;
  Clock clock = system_clock();
  RandomSource random = secure_random();
  auth::Policy auth_policy;
  std::uint64_t snapshot_every = 1000;
};

// Use-case orchestration. All journal writers except login auditing run under
// one exclusive lock; reads share it.
class Bank {
 public:
  // Recovers from options.data_dir (created if missing) and opens its journal.
  static std::unique_ptr<Bank> open(BankOptions options);

  // Journal kept in memory; for tests.
  static std::unique_ptr<Bank> in_memory(Clock clock, RandomSource random,
                                         auth::Policy policy = {});

  ~Bank();

  // ---- sessions
  auth::Session login(std::string_view username, std::string_view password);
  void logout(std::string_view token);
  auth::Principal authenticate(std::string_view token);

  // ---- customer flows
  Receipt pay_bill(std::string_view token, std::string_view from_account,
                   std::string_view biller_id, std::string_view reference, Money amount,
                   std::string_view idempotency_key);
  Receipt transfer_funds(std::string_view token, std::string_view from_account,
                         std::string_view to_account, Money amount, std::string_view memo,
                         std::string_view idempotency_key);
  ChequeBookRequest request_cheque_book(std::string_view token, std::string_view account,
                                        int leaves);
  StopChequeOrder stop_cheque(std::string_view token, std::string_view account,
                              std::string_view cheque_number, std::string_view reason);
  StatementPage view_statement(std::string_view token, std::string_view account,
                               const StatementQuery& query);
  void change_password(std::string_view token, std::string_view old_password,
                       std::string_view new_password);
  CustomerProfile update_contact(std::string_view token, const ContactUpdate& update);

  // ---- reads
  std::vector<ledger::Account> list_accounts(std::string_view token);
  Money balance(std::string_view token, std::string_view account);
  std::vector<Biller> list_billers(std::string_view token);

  // ---- admin
  CustomerProfile admin_create_customer(std::string_view token, const NewCustomer& profile,
                                        std::string_view initial_password);
  ledger::Account admin_open_funded_account(std::string_view token, std::string_view customer_id,
                                            ledger::AccountKind kind, Money opening_deposit);
  Biller admin_register_biller(std::string_view token, std::string_view name);
  Biller admin_retire_biller(std::string_view token, std::string_view biller_id);
  ChequeBookRequest admin_decide_cheque_request(std::string_view token,
                                                std::string_view request_id,
                                                ChequeRequestStatus decision);
  ledger::Account admin_set_account_status(std::string_view token, std::string_view account,
                                           ledger::AccountStatus status);

  // Creates an administrator unless `username` already exists. No session
  // needed: only the server process calls this, at startup.
  std::string bootstrap_admin(std::string_view username, std::string_view password);

  // ---- operations
  std::uint64_t last_seq() const;
  // Canonical state document at last_seq(), consistent across components.
  std::pair<std::uint64_t, json> state() const;
  // Writes a snapshot of the current state; returns its as_of_seq.
  std::uint64_t write_snapshot();
  // Raw journal bytes (in-memory mode) for replay checks.
  std::string journal_bytes() const;

 private:
  Bank(std::unique_ptr<persistence::RecordSink> sink, std::filesystem::path data_dir,
       BankState state, Clock clock, RandomSource random, auth::Policy policy,
       std::uint64_t snapshot_every);

  auth::Principal require_admin(std::string_view token);
  ledger::Account owned_account(const auth::Principal& who, std::string_view account,
                                bool allow_admin) const;
  std::optional<AccountId> vault() const;
  Receipt receipt_for(const ledger::Transaction& tx) const;
  void audit(const auth::Principal& who, std::string_view operation, std::string_view subject);
  void commit(std::string_view kind, json payload);
  AccountId ensure_vault();
  void maybe_snapshot();

  std::unique_ptr<persistence::RecordSink> sink_;
  std::filesystem::path data_dir_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  Registry registry_;
  ledger::Ledger ledger_;
  auth::Auth auth_;
  std::uint64_t snapshot_every_;
  std::uint64_t last_snapshot_seq_ = 0;
};

bool valid_username(std::string_view username);
bool valid_email(std::string_view email);
bool valid_cheque_number(std::string_view number);

}  // namespace bank::services
