#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bank/env.hpp"
#include "bank/persistence/journal.hpp"

namespace bank::ledger {

using persistence::json;
using persistence::JournalRecord;

// Integer count of minor currency units.
struct Money {
  std::int64_t minor = 0;

  constexpr auto operator<=>(const Money&) const = default;
};

using AccountId = std::string;
using TxId = std::string;

inline constexpr std::string_view kInternalOwner = "INTERNAL";

enum class AccountKind { CustomerChecking, CustomerSavings, InternalSettlement };
enum class AccountStatus { Active, Frozen, Closed };
enum class Direction { Debit, Credit };
enum class TxKind { Transfer, BillPayment, InitialFunding, Adjustment };

std::string_view to_string(AccountKind v);
std::string_view to_string(AccountStatus v);
std::string_view to_string(Direction v);
std::string_view to_string(TxKind v);

// Throw VALIDATION on unknown names.
AccountKind parse_account_kind(std::string_view s);
AccountStatus parse_account_status(std::string_view s);
Direction parse_direction(std::string_view s);
TxKind parse_tx_kind(std::string_view s);

inline bool is_customer_kind(AccountKind k) { return k != AccountKind::InternalSettlement; }

std::string format_account_id(std::uint64_t n);  // ACC-000001
std::string format_tx_id(std::uint64_t n);       // TX-0000000001
// Sequence number of a well-formed tx id, nullopt otherwise.
std::optional<std::uint64_t> parse_tx_id(std::string_view s);

struct Account {
  AccountId id;
  std::string owner;  // CustomerId or kInternalOwner
  AccountKind kind = AccountKind::CustomerChecking;
  AccountStatus status = AccountStatus::Active;
  Money balance;

  friend bool operator==(const Account&, const Account&) = default;
};

struct Posting {
  AccountId account_id;
  Direction direction = Direction::Debit;
  Money amount;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct Transaction {
  TxId tx_id;
  std::int64_t timestamp = 0;
  TxKind kind = TxKind::Transfer;
  std::vector<Posting> postings;
  std::string memo;
  std::optional<std::string> idempotency_key;
  std::string initiator;

  // Signed effect on `account` (credit positive); 0 if untouched.
  Money effect_on(std::string_view account) const;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

json to_json(const Account& a);
json to_json(const Transaction& t);
Transaction transaction_from_json(const json& j);

inline constexpr std::size_t kMaxMemo = 140;
inline constexpr std::size_t kMaxIdempotencyKey = 64;
inline constexpr std::size_t kMaxPageSize = 100;

struct PostingQuery {
  std::optional<std::int64_t> from_ts;
  std::optional<std::int64_t> to_ts;
  std::optional<std::int64_t> min_amount;
  std::optional<std::int64_t> max_amount;
  std::optional<TxId> cursor;
  std::size_t limit = 50;
};

struct PostingView {
  TxId tx_id;
  std::int64_t timestamp = 0;
  TxKind kind = TxKind::Transfer;
  Direction direction = Direction::Debit;
  Money amount;            // positive leg amount
  Money signed_amount;     // credit positive
  Money running_balance;   // account balance right after this transaction
  std::string memo;

  friend bool operator==(const PostingView&, const PostingView&) = default;
};

struct PostingPage {
  std::vector<PostingView> items;
  std::optional<TxId> next_cursor;
};

// Pure ledger state. Mutated only by apply(); every live mutation goes through
// a journal record first so replay reproduces it exactly.
class Book {
 public:
  void apply(const JournalRecord& record);

  json to_json() const;
  static Book from_json(const json& j);

  const Account* find_account(std::string_view id) const;
  const std::vector<Account>& accounts() const { return accounts_; }
  const std::vector<Transaction>& transactions() const { return transactions_; }
  const Transaction* find_idempotent(std::string_view initiator, std::string_view key) const;
  const Transaction* find_transaction(std::string_view tx_id) const;

  PostingPage list_postings(std::string_view account, const PostingQuery& query) const;

  std::uint64_t next_account_number() const { return accounts_.size() + 1; }
  std::uint64_t next_tx_number() const { return transactions_.size() + 1; }

 private:
  struct PostingRef {
    std::size_t tx;  // index into transactions_
    std::size_t leg;
    Money running;
  };

  Account& account_ref(std::string_view id);
  void apply_transaction(Transaction tx);

  std::vector<Account> accounts_;
  std::unordered_map<std::string, std::size_t> account_index_;
  std::vector<Transaction> transactions_;
  std::map<std::pair<std::string, std::string>, std::size_t, std::less<>> idempotency_;
  std::vector<std::vector<PostingRef>> postings_by_account_;
};

// Principal on whose behalf a transaction is posted. Customer-initiated
// postings may not touch FROZEN accounts.
struct Initiator {
  std::string principal;
  bool customer = true;
};

struct CommitResult {
  Transaction tx;
  bool replayed = false;  // idempotent replay of an earlier commit
};

// Single-writer commit path over a Book and a journal.
class Ledger {
 public:
  using CustomerExists = std::function<bool(std::string_view)>;

  Ledger(persistence::RecordSink& sink, Clock clock, Book book = {},
         CustomerExists customer_exists = {});

  AccountId open_account(std::string_view owner, AccountKind kind);

  // Validates, journals, then applies. Nothing is applied if any check or the
  // journal append fails. A repeated (initiator, key) returns the original
  // transaction with replayed = true and journals nothing.
  CommitResult post_transaction(TxKind kind, std::vector<Posting> postings, std::string memo,
                                std::optional<std::string> idempotency_key,
                                const Initiator& initiator);

  Money balance(std::string_view account) const;
  Account account(std::string_view account) const;
  PostingPage list_postings(std::string_view account, const PostingQuery& query) const;
  Account set_account_status(std::string_view account, AccountStatus status);

  std::optional<Transaction> find_idempotent(std::string_view initiator,
                                             std::string_view key) const;

  // Runs `f(const Book&)` under the read lock.
  template <typename F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mu_);
    return std::forward<F>(f)(book_);
  }

  Book snapshot() const;

 private:
  const Account& require_account(std::string_view id) const;
  void commit(std::string_view kind, json payload, std::int64_t ts);

  persistence::RecordSink& sink_;
  Clock clock_;
  CustomerExists customer_exists_;
  mutable std::shared_mutex mu_;
  Book book_;
};

}  // namespace bank::ledger
