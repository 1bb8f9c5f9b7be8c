#include "bank/ledger.hpp"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <set>

#include "bank/error.hpp"

namespace bank::ledger {

namespace kind = persistence::kind;

std::string_view to_string(AccountKind v) {
  switch (v) {
    case AccountKind::CustomerChecking: return "CUSTOMER_CHECKING";
    case AccountKind::CustomerSavings: return "CUSTOMER_SAVINGS";
    case AccountKind::InternalSettlement: return "INTERNAL_SETTLEMENT";
  }
  return "?";
}

std::string_view to_string(AccountStatus v) {
  switch (v) {
    case AccountStatus::Active: return "ACTIVE";
    case AccountStatus::Frozen: return "FROZEN";
    case AccountStatus::Closed: return "CLOSED";
  }
  return "?";
}

std::string_view to_string(Direction v) { return v == Direction::Debit ? "DEBIT" : "CREDIT"; }

std::string_view to_string(TxKind v) {
  switch (v) {
    case TxKind::Transfer: return "TRANSFER";
    case TxKind::BillPayment: return "BILL_PAYMENT";
    case TxKind::InitialFunding: return "INITIAL_FUNDING";
    case TxKind::Adjustment: return "ADJUSTMENT";
  }
  return "?";
}

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const E (&values)[N], std::string_view what) {
  for (E v : values) {
    if (to_string(v) == s) return v;
  }
  fail(ErrorCode::Validation, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

std::string format_seq(std::string_view prefix, std::uint64_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*llu", width, static_cast<unsigned long long>(n));
  return std::string(prefix) + buf;
}

bool add_overflows(std::int64_t a, std::int64_t b, std::int64_t& out) {
  return __builtin_add_overflow(a, b, &out);
}

}  // namespace

AccountKind parse_account_kind(std::string_view s) {
  static constexpr AccountKind all[] = {AccountKind::CustomerChecking, AccountKind::CustomerSavings,
                                        AccountKind::InternalSettlement};
  return parse_enum(s, all, "account kind");
}

AccountStatus parse_account_status(std::string_view s) {
  static constexpr AccountStatus all[] = {AccountStatus::Active, AccountStatus::Frozen,
                                          AccountStatus::Closed};
  return parse_enum(s, all, "account status");
}

Direction parse_direction(std::string_view s) {
  static constexpr Direction all[] = {Direction::Debit, Direction::Credit};
  return parse_enum(s, all, "direction");
}

TxKind parse_tx_kind(std::string_view s) {
  static constexpr TxKind all[] = {TxKind::Transfer, TxKind::BillPayment, TxKind::InitialFunding,
                                   TxKind::Adjustment};
  return parse_enum(s, all, "transaction kind");
}

std::string format_account_id(std::uint64_t n) { return format_seq("ACC-", n, 6); }
std::string format_tx_id(std::uint64_t n) { return format_seq("TX-", n, 10); }

std::optional<std::uint64_t> parse_tx_id(std::string_view s) {
  if (s.size() != 13 || !s.starts_with("TX-")) return std::nullopt;
  std::uint64_t n = 0;
  for (char c : s.substr(3)) {
    if (c < '0' || c > '9') return std::nullopt;
    n = n * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return n;
}

Money Transaction::effect_on(std::string_view account) const {
  std::int64_t sum = 0;
  for (const auto& p : postings) {
    if (p.account_id != account) continue;
    sum += p.direction == Direction::Credit ? p.amount.minor : -p.amount.minor;
  }
  return Money{sum};
}

json to_json(const Account& a) {
  return {{"account_id", a.id},
          {"owner", a.owner},
          {"kind", to_string(a.kind)},
          {"status", to_string(a.status)},
          {"balance_minor", a.balance.minor}};
}

json to_json(const Transaction& t) {
  json postings = json::array();
  for (const auto& p : t.postings) {
    postings.push_back({{"account_id", p.account_id},
                        {"direction", to_string(p.direction)},
                        {"amount_minor", p.amount.minor}});
  }
  json j = {{"tx_id", t.tx_id},         {"timestamp", t.timestamp},
            {"kind", to_string(t.kind)}, {"postings", std::move(postings)},
            {"memo", t.memo},           {"initiator", t.initiator}};
  if (t.idempotency_key) j["idempotency_key"] = *t.idempotency_key;
  return j;
}

Transaction transaction_from_json(const json& j) {
  Transaction t;
  t.tx_id = j.at("tx_id").get<std::string>();
  t.timestamp = j.at("timestamp").get<std::int64_t>();
  t.kind = parse_tx_kind(j.at("kind").get<std::string>());
  for (const auto& p : j.at("postings")) {
    t.postings.push_back(Posting{p.at("account_id").get<std::string>(),
                                 parse_direction(p.at("direction").get<std::string>()),
                                 Money{p.at("amount_minor").get<std::int64_t>()}});
  }
  t.memo = j.at("memo").get<std::string>();
  t.initiator = j.at("initiator").get<std::string>();
  if (j.contains("idempotency_key")) t.idempotency_key = j["idempotency_key"].get<std::string>();
  return t;
}

// ---- Book ------------------------------------------------------------------

const Account* Book::find_account(std::string_view id) const {
  auto it = account_index_.find(std::string(id));
  return it == account_index_.end() ? nullptr : &accounts_[it->second];
}

Account& Book::account_ref(std::string_view id) {
  auto it = account_index_.find(std::string(id));
  if (it == account_index_.end()) {
    throw std::runtime_error("journal references unknown account " + std::string(id));
  }
  return accounts_[it->second];
}

const Transaction* Book::find_idempotent(std::string_view initiator, std::string_view key) const {
  auto it = idempotency_.find(std::pair<std::string, std::string>(initiator, key));
  return it == idempotency_.end() ? nullptr : &transactions_[it->second];
}

const Transaction* Book::find_transaction(std::string_view tx_id) const {
  auto n = parse_tx_id(tx_id);
  if (!n || *n == 0 || *n > transactions_.size()) return nullptr;
  return &transactions_[*n - 1];
}

void Book::apply_transaction(Transaction tx) {
  if (tx.tx_id != format_tx_id(next_tx_number())) {
    throw std::runtime_error("out-of-order transaction " + tx.tx_id);
  }
  const std::size_t index = transactions_.size();
  for (std::size_t leg = 0; leg < tx.postings.size(); ++leg) {
    const auto& p = tx.postings[leg];
    Account& a = account_ref(p.account_id);
    a.balance.minor += p.direction == Direction::Credit ? p.amount.minor : -p.amount.minor;
    postings_by_account_[account_index_.at(p.account_id)].push_back(
        PostingRef{index, leg, a.balance});
  }
  if (tx.idempotency_key) idempotency_.emplace(std::pair{tx.initiator, *tx.idempotency_key}, index);
  transactions_.push_back(std::move(tx));
}

void Book::apply(const JournalRecord& record) {
  const auto& p = record.payload;
  if (record.kind == kind::kAccountOpened) {
    Account a;
    a.id = p.at("account_id").get<std::string>();
    a.owner = p.at("owner").get<std::string>();
    a.kind = parse_account_kind(p.at("kind").get<std::string>());
    if (a.id != format_account_id(next_account_number())) {
      throw std::runtime_error("out-of-order account " + a.id);
    }
    account_index_.emplace(a.id, accounts_.size());
    accounts_.push_back(std::move(a));
    postings_by_account_.emplace_back();
  } else if (record.kind == kind::kAccountStatus) {
    account_ref(p.at("account_id").get<std::string>()).status =
        parse_account_status(p.at("status").get<std::string>());
  } else if (record.kind == kind::kTxCommitted) {
    apply_transaction(transaction_from_json(p));
  }
}

json Book::to_json() const {
  json accounts = json::array();
  for (const auto& a : accounts_) accounts.push_back(ledger::to_json(a));
  json txs = json::array();
  for (const auto& t : transactions_) txs.push_back(ledger::to_json(t));
  return {{"accounts", std::move(accounts)}, {"transactions", std::move(txs)}};
}

Book Book::from_json(const json& j) {
  Book book;
  for (const auto& a : j.at("accounts")) {
    Account acc;
    acc.id = a.at("account_id").get<std::string>();
    acc.owner = a.at("owner").get<std::string>();
    acc.kind = parse_account_kind(a.at("kind").get<std::string>());
    acc.status = parse_account_status(a.at("status").get<std::string>());
    book.account_index_.emplace(acc.id, book.accounts_.size());
    book.accounts_.push_back(std::move(acc));
    book.postings_by_account_.emplace_back();
  }
  for (const auto& t : j.at("transactions")) book.apply_transaction(transaction_from_json(t));
  // Cached balances in the snapshot must agree with the rebuilt posting sums.
  const auto& stored = j.at("accounts");
  for (std::size_t i = 0; i < book.accounts_.size(); ++i) {
    if (stored[i].at("balance_minor").get<std::int64_t>() != book.accounts_[i].balance.minor) {
      throw std::runtime_error("snapshot balance mismatch for " + book.accounts_[i].id);
    }
  }
  return book;
}

PostingPage Book::list_postings(std::string_view account, const PostingQuery& q) const {
  auto it = account_index_.find(std::string(account));
  if (it == account_index_.end()) {
    fail(ErrorCode::UnknownAccount, "unknown account " + std::string(account));
  }
  if (q.limit < 1 || q.limit > kMaxPageSize) {
    fail(ErrorCode::Validation, "limit must be between 1 and 100");
  }
  if (q.from_ts && q.to_ts && *q.from_ts > *q.to_ts) {
    fail(ErrorCode::Validation, "from_ts is after to_ts");
  }
  if (q.min_amount && q.max_amount && *q.min_amount > *q.max_amount) {
    fail(ErrorCode::Validation, "min_amount is above max_amount");
  }
  std::size_t after_tx = 0;  // 1-based tx number; 0 = from the start
  if (q.cursor) {
    auto n = parse_tx_id(*q.cursor);
    if (!n) fail(ErrorCode::Validation, "malformed cursor");
    after_tx = *n;
  }

  const auto& refs = postings_by_account_[it->second];
  auto pos = std::upper_bound(refs.begin(), refs.end(), after_tx,
                              [](std::size_t n, const PostingRef& r) { return n < r.tx + 1; });

  auto matches = [&](const PostingRef& r) {
    const Transaction& t = transactions_[r.tx];
    const std::int64_t amount = t.postings[r.leg].amount.minor;
    return (!q.from_ts || t.timestamp >= *q.from_ts) && (!q.to_ts || t.timestamp <= *q.to_ts) &&
           (!q.min_amount || amount >= *q.min_amount) && (!q.max_amount || amount <= *q.max_amount);
  };

  PostingPage page;
  for (; pos != refs.end(); ++pos) {
    if (!matches(*pos)) continue;
    if (page.items.size() == q.limit) {
      page.next_cursor = page.items.back().tx_id;
      break;
    }
    const Transaction& t = transactions_[pos->tx];
    const Posting& leg = t.postings[pos->leg];
    page.items.push_back(PostingView{
        t.tx_id, t.timestamp, t.kind, leg.direction, leg.amount,
        Money{leg.direction == Direction::Credit ? leg.amount.minor : -leg.amount.minor},
        pos->running, t.memo});
  }
  return page;
}

// ---- Ledger ----------------------------------------------------------------

Ledger::Ledger(persistence::RecordSink& sink, Clock clock, Book book,
               CustomerExists customer_exists)
    : sink_(sink),
      clock_(std::move(clock)),
      customer_exists_(std::move(customer_exists)),
      book_(std::move(book)) {}

void Ledger::commit(std::string_view record_kind, json payload, std::int64_t ts) {
  book_.apply(sink_.append(record_kind, std::move(payload), ts));
}

const Account& Ledger::require_account(std::string_view id) const {
  const Account* a = book_.find_account(id);
  if (!a) fail(ErrorCode::UnknownAccount, "unknown account " + std::string(id));
  return *a;
}

AccountId Ledger::open_account(std::string_view owner, AccountKind kind) {
  std::unique_lock lock(mu_);
  const bool internal = owner == kInternalOwner;
  if (!internal && !(customer_exists_ && customer_exists_(owner))) {
    fail(ErrorCode::UnknownCustomer, "unknown customer " + std::string(owner));
  }
  if (internal == is_customer_kind(kind)) {
    fail(ErrorCode::Validation, std::string(to_string(kind)) + " does not fit owner " +
                                    std::string(owner));
  }
  const AccountId id = format_account_id(book_.next_account_number());
  commit(kind::kAccountOpened, {{"account_id", id}, {"owner", owner}, {"kind", to_string(kind)}},
         clock_());
  return id;
}

CommitResult Ledger::post_transaction(TxKind kind, std::vector<Posting> postings, std::string memo,
                                      std::optional<std::string> idempotency_key,
                                      const Initiator& initiator) {
  std::unique_lock lock(mu_);
  if (idempotency_key) {
    if (idempotency_key->empty() || idempotency_key->size() > kMaxIdempotencyKey) {
      fail(ErrorCode::Validation, "idempotency key must be 1-64 characters");
    }
    if (const Transaction* prior = book_.find_idempotent(initiator.principal, *idempotency_key)) {
      return CommitResult{*prior, true};
    }
  }
  if (postings.size() < 2) fail(ErrorCode::Validation, "a transaction needs at least two postings");
  if (memo.size() > kMaxMemo) fail(ErrorCode::Validation, "memo exceeds 140 characters");

  std::int64_t debits = 0;
  std::int64_t credits = 0;
  std::set<std::string_view> seen;
  for (const auto& p : postings) {
    if (p.amount.minor <= 0) fail(ErrorCode::Validation, "posting amounts must be positive");
    if (!seen.insert(p.account_id).second) {
      fail(ErrorCode::Validation, "account " + p.account_id + " appears in more than one posting");
    }
    std::int64_t& side = p.direction == Direction::Debit ? debits : credits;
    if (add_overflows(side, p.amount.minor, side)) fail(ErrorCode::Validation, "amount overflow");
  }
  if (debits != credits) {
    fail(ErrorCode::Unbalanced, "debits " + std::to_string(debits) + " != credits " +
                                    std::to_string(credits));
  }

  for (const auto& p : postings) {
    const Account& a = require_account(p.account_id);
    if (a.status == AccountStatus::Closed) fail(ErrorCode::Frozen, "account " + a.id + " is closed");
    if (a.status == AccountStatus::Frozen && initiator.customer) {
      fail(ErrorCode::Frozen, "account " + a.id + " is frozen");
    }
    const std::int64_t delta =
        p.direction == Direction::Credit ? p.amount.minor : -p.amount.minor;
    std::int64_t after = 0;
    if (add_overflows(a.balance.minor, delta, after)) fail(ErrorCode::Validation, "balance overflow");
    if (is_customer_kind(a.kind) && after < 0) {
      fail(ErrorCode::InsufficientFunds, "insufficient funds in " + a.id);
    }
  }

  Transaction tx;
  tx.tx_id = format_tx_id(book_.next_tx_number());
  tx.timestamp = clock_();
  tx.kind = kind;
  tx.postings = std::move(postings);
  tx.memo = std::move(memo);
  tx.idempotency_key = std::move(idempotency_key);
  tx.initiator = initiator.principal;
  commit(kind::kTxCommitted, to_json(tx), tx.timestamp);
  return CommitResult{book_.transactions().back(), false};
}

Money Ledger::balance(std::string_view account) const {
  std::shared_lock lock(mu_);
  return require_account(account).balance;
}

Account Ledger::account(std::string_view account) const {
  std::shared_lock lock(mu_);
  return require_account(account);
}

PostingPage Ledger::list_postings(std::string_view account, const PostingQuery& query) const {
  std::shared_lock lock(mu_);
  return book_.list_postings(account, query);
}

Account Ledger::set_account_status(std::string_view account, AccountStatus status) {
  std::unique_lock lock(mu_);
  const Account& a = require_account(account);
  if (status == AccountStatus::Closed && a.balance.minor != 0) {
    fail(ErrorCode::Validation, "cannot close " + a.id + " with nonzero balance");
  }
  commit(kind::kAccountStatus, {{"account_id", a.id}, {"status", to_string(status)}}, clock_());
  return require_account(account);
}

std::optional<Transaction> Ledger::find_idempotent(std::string_view initiator,
                                                   std::string_view key) const {
  std::shared_lock lock(mu_);
  const Transaction* t = book_.find_idempotent(initiator, key);
  return t ? std::optional<Transaction>(*t) : std::nullopt;
}

Book Ledger::snapshot() const {
  std::shared_lock lock(mu_);
  return book_;
}

}  // namespace bank::ledger
