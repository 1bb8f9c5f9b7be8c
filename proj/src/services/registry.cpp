#include <stdexcept>

#include "bank/error.hpp"
#include "bank/services.hpp"

namespace bank::services {

namespace kind = persistence::kind;

std::string_view to_string(BillerStatus s) { return s == BillerStatus::Active ? "ACTIVE" : "RETIRED"; }

std::string_view to_string(ChequeRequestStatus s) {
  switch (s) {
    case ChequeRequestStatus::Pending: return "PENDING";
    case ChequeRequestStatus::Approved: return "APPROVED";
    case ChequeRequestStatus::Rejected: return "REJECTED";
  }
  return "?";
}

std::string_view to_string(StopOrderStatus s) {
  return s == StopOrderStatus::Active ? "ACTIVE" : "CANCELLED";
}

ChequeRequestStatus parse_cheque_status(std::string_view s) {
  if (s == "PENDING") return ChequeRequestStatus::Pending;
  if (s == "APPROVED") return ChequeRequestStatus::Approved;
  if (s == "REJECTED") return ChequeRequestStatus::Rejected;
  fail(ErrorCode::Validation, "unknown cheque request status '" + std::string(s) + "'");
}

namespace {

BillerStatus parse_biller_status(std::string_view s) {
  if (s == "ACTIVE") return BillerStatus::Active;
  if (s == "RETIRED") return BillerStatus::Retired;
  throw std::runtime_error("unknown biller status " + std::string(s));
}

StopOrderStatus parse_stop_status(std::string_view s) {
  if (s == "ACTIVE") return StopOrderStatus::Active;
  if (s == "CANCELLED") return StopOrderStatus::Cancelled;
  throw std::runtime_error("unknown stop order status " + std::string(s));
}

CustomerProfile customer_from_json(const json& j) {
  return CustomerProfile{j.at("customer_id").get<std::string>(),
                         j.at("username").get<std::string>(),
                         j.at("full_name").get<std::string>(),
                         j.at("email").get<std::string>(),
                         j.at("phone").get<std::string>(),
                         j.at("postal_address").get<std::string>()};
}

Biller biller_from_json(const json& j) {
  return Biller{j.at("biller_id").get<std::string>(), j.at("name").get<std::string>(),
                j.at("settlement_account_id").get<std::string>(),
                parse_biller_status(j.value("status", "ACTIVE"))};
}

ChequeBookRequest cheque_from_json(const json& j) {
  ChequeBookRequest r;
  r.id = j.at("request_id").get<std::string>();
  r.account_id = j.at("account_id").get<std::string>();
  r.leaves = j.at("leaves").get<int>();
  r.status = parse_cheque_status(j.value("status", "PENDING"));
  r.requested_ts = j.at("requested_ts").get<std::int64_t>();
  if (j.contains("decided_ts")) r.decided_ts = j["decided_ts"].get<std::int64_t>();
  return r;
}

StopChequeOrder stop_from_json(const json& j) {
  return StopChequeOrder{j.at("order_id").get<std::string>(), j.at("account_id").get<std::string>(),
                         j.at("cheque_number").get<std::string>(), j.at("reason").get<std::string>(),
                         parse_stop_status(j.value("status", "ACTIVE"))};
}

template <typename T>
T* find_by_id(std::vector<T>& items, std::string_view id) {
  for (auto& item : items) {
    if (item.id == id) return &item;
  }
  return nullptr;
}

template <typename T>
const T* find_by_id(const std::vector<T>& items, std::string_view id) {
  for (const auto& item : items) {
    if (item.id == id) return &item;
  }
  return nullptr;
}

}  // namespace

json to_json(const CustomerProfile& p) {
  return {{"customer_id", p.id},     {"username", p.username}, {"full_name", p.full_name},
          {"email", p.email},        {"phone", p.phone},       {"postal_address", p.postal_address}};
}

json to_json(const Biller& b) {
  return {{"biller_id", b.id},
          {"name", b.name},
          {"settlement_account_id", b.settlement_account_id},
          {"status", to_string(b.status)}};
}

json to_json(const ChequeBookRequest& r) {
  json j = {{"request_id", r.id},
            {"account_id", r.account_id},
            {"leaves", r.leaves},
            {"status", to_string(r.status)},
            {"requested_ts", r.requested_ts}};
  if (r.decided_ts) j["decided_ts"] = *r.decided_ts;
  return j;
}

json to_json(const StopChequeOrder& o) {
  return {{"order_id", o.id},
          {"account_id", o.account_id},
          {"cheque_number", o.cheque_number},
          {"reason", o.reason},
          {"status", to_string(o.status)}};
}

void Registry::apply(const JournalRecord& record) {
  const auto& p = record.payload;
  if (record.kind == kind::kCustomerCreated) {
    customers_.push_back(customer_from_json(p));
  } else if (record.kind == kind::kProfileUpdated) {
    auto* c = find_by_id(customers_, p.at("customer_id").get<std::string>());
    if (!c) throw std::runtime_error("profile update for unknown customer");
    if (p.contains("email")) c->email = p["email"].get<std::string>();
    if (p.contains("phone")) c->phone = p["phone"].get<std::string>();
    if (p.contains("postal_address")) c->postal_address = p["postal_address"].get<std::string>();
  } else if (record.kind == kind::kBillerRegistered) {
    Biller b = biller_from_json(p);
    biller_by_settlement_[b.settlement_account_id] = billers_.size();
    billers_.push_back(std::move(b));
  } else if (record.kind == kind::kBillerStatus) {
    auto* b = find_by_id(billers_, p.at("biller_id").get<std::string>());
    if (!b) throw std::runtime_error("status for unknown biller");
    b->status = parse_biller_status(p.at("status").get<std::string>());
  } else if (record.kind == kind::kChequeRequest) {
    cheque_requests_.push_back(cheque_from_json(p));
  } else if (record.kind == kind::kChequeDecision) {
    auto* r = find_by_id(cheque_requests_, p.at("request_id").get<std::string>());
    if (!r) throw std::runtime_error("decision for unknown cheque request");
    r->status = parse_cheque_status(p.at("status").get<std::string>());
    r->decided_ts = p.at("decided_ts").get<std::int64_t>();
  } else if (record.kind == kind::kStopOrder) {
    stop_orders_.push_back(stop_from_json(p));
  }
}

json Registry::to_json() const {
  json customers = json::array();
  for (const auto& c : customers_) customers.push_back(services::to_json(c));
  json billers = json::array();
  for (const auto& b : billers_) billers.push_back(services::to_json(b));
  json requests = json::array();
  for (const auto& r : cheque_requests_) requests.push_back(services::to_json(r));
  json stops = json::array();
  for (const auto& o : stop_orders_) stops.push_back(services::to_json(o));
  return {{"customers", std::move(customers)},
          {"billers", std::move(billers)},
          {"cheque_requests", std::move(requests)},
          {"stop_orders", std::move(stops)}};
}

Registry Registry::from_json(const json& j) {
  Registry r;
  for (const auto& c : j.at("customers")) r.customers_.push_back(customer_from_json(c));
  for (const auto& b : j.at("billers")) {
    Biller biller = biller_from_json(b);
    r.biller_by_settlement_[biller.settlement_account_id] = r.billers_.size();
    r.billers_.push_back(std::move(biller));
  }
  for (const auto& c : j.at("cheque_requests")) r.cheque_requests_.push_back(cheque_from_json(c));
  for (const auto& o : j.at("stop_orders")) r.stop_orders_.push_back(stop_from_json(o));
  return r;
}

const CustomerProfile* Registry::find_customer(std::string_view id) const {
  return find_by_id(customers_, id);
}

const Biller* Registry::find_biller(std::string_view id) const { return find_by_id(billers_, id); }

const Biller* Registry::biller_for_settlement(std::string_view account) const {
  auto it = biller_by_settlement_.find(account);
  return it == biller_by_settlement_.end() ? nullptr : &billers_[it->second];
}

const ChequeBookRequest* Registry::find_cheque_request(std::string_view id) const {
  return find_by_id(cheque_requests_, id);
}

const StopChequeOrder* Registry::find_active_stop(std::string_view account,
                                                  std::string_view cheque_number) const {
  for (const auto& o : stop_orders_) {
    if (o.account_id == account && o.cheque_number == cheque_number &&
        o.status == StopOrderStatus::Active) {
      return &o;
    }
  }
  return nullptr;
}

void BankState::apply(const JournalRecord& record) {
  book.apply(record);
  credentials.apply(record);
  registry.apply(record);
}

json BankState::to_json() const {
  return {{"ledger", book.to_json()},
          {"auth", credentials.to_json()},
          {"registry", registry.to_json()}};
}

BankState BankState::from_json(const json& j) {
  return BankState{ledger::Book::from_json(j.at("ledger")),
                   auth::CredentialBook::from_json(j.at("auth")),
                   Registry::from_json(j.at("registry"))};
}

}  // namespace bank::services
