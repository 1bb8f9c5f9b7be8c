#include <algorithm>
#include <charconv>
#include <functional>
#include <iostream>

#include "bank/api.hpp"

namespace bank::api {

using services::Bank;

// ---- renderers -------------------------------------------------------------

json render(const services::Receipt& r) {
  return {{"tx_id", r.tx_id},
          {"timestamp", r.timestamp},
          {"kind", ledger::to_string(r.kind)},
          {"amount_minor", r.amount.minor},
          {"from_account", r.from_account},
          {"counterparty", r.counterparty},
          {"memo", r.memo}};
}

json render(const services::StatementPage& page) {
  json lines = json::array();
  for (const auto& l : page.lines) {
    lines.push_back({{"tx_id", l.tx_id},
                     {"timestamp", l.timestamp},
                     {"kind", ledger::to_string(l.kind)},
                     {"amount_minor", l.amount.minor},
                     {"running_balance_minor", l.running_balance.minor},
                     {"memo", l.memo}});
  }
  json out = {{"lines", std::move(lines)}};
  if (page.next_cursor) out["next_cursor"] = *page.next_cursor;
  return out;
}

json render(const services::CustomerProfile& p) { return services::to_json(p); }
json render(const services::ChequeBookRequest& r) { return services::to_json(r); }
json render(const services::StopChequeOrder& o) { return services::to_json(o); }

json render_account(const ledger::Account& a) {
  return {{"account_id", a.id},
          {"owner", a.owner},
          {"kind", ledger::to_string(a.kind)},
          {"status", ledger::to_string(a.status)},
          {"amount_minor", a.balance.minor}};
}

json render_public(const services::Biller& b) {
  return {{"biller_id", b.id}, {"name", b.name}, {"status", services::to_string(b.status)}};
}

json render_admin(const services::Biller& b) { return services::to_json(b); }

json render(const auth::Session& s) {
  return {{"token", s.token},
          {"principal_id", s.principal_id},
          {"role", auth::to_string(s.role)},
          {"idle_ttl_s", s.idle_ttl_ms / 1000}};
}

json render_balance(std::string_view account, ledger::Money amount) {
  return {{"account_id", account}, {"amount_minor", amount.minor}};
}

Response json_response(int status, const json& body) { return Response{status, body.dump()}; }

Response error_response(ErrorCode code, std::string_view message) {
  return json_response(http_status(code),
                       {{"error", {{"code", code_name(code)}, {"message", message}}}});
}

// ---- request helpers -------------------------------------------------------

namespace {

struct Context {
  const Request& request;
  std::vector<std::string> params;  // path wildcards in order

  std::string token() const {
    constexpr std::string_view prefix = "Bearer ";
    const std::string& h = request.authorization;
    if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0) {
      return h.substr(prefix.size());
    }
    return {};
  }

  json body() const {
    json j = json::parse(request.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw BankError(ErrorCode::MalformedJson, "request body must be a JSON object");
    }
    return j;
  }

  std::optional<std::string> query(const std::string& key) const {
    auto it = request.query.find(key);
    if (it == request.query.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::int64_t> query_int(const std::string& key) const {
    auto v = query(key);
    if (!v) return std::nullopt;
    std::int64_t out = 0;
    const char* end = v->data() + v->size();
    auto [ptr, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc() || ptr != end || v->empty()) {
      fail(ErrorCode::Validation, key + " must be an integer");
    }
    return out;
  }
};

std::string required_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    fail(ErrorCode::Validation, std::string(key) + " is required and must be a string");
  }
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) fail(ErrorCode::Validation, std::string(key) + " must be a string");
  return it->get<std::string>();
}

std::int64_t required_int(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_number_integer()) {
    fail(ErrorCode::Validation, std::string(key) + " is required and must be an integer");
  }
  return it->get<std::int64_t>();
}

}  // namespace

// ---- routes ----------------------------------------------------------------

struct Router::Route {
  std::string method;
  std::vector<std::string> segments;  // "*" matches one segment
  std::function<Response(Bank&, const Context&)> handler;
};

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < path.size()) {
    if (path[pos] == '/') {
      ++pos;
      continue;
    }
    const std::size_t next = path.find('/', pos);
    out.emplace_back(path.substr(pos, next == std::string_view::npos ? path.npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next;
  }
  return out;
}

bool match(const std::vector<std::string>& pattern, const std::vector<std::string>& path,
           std::vector<std::string>& params) {
  if (pattern.size() != path.size()) return false;
  std::vector<std::string> captured;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == "*") captured.push_back(path[i]);
    else if (pattern[i] != path[i]) return false;
  }
  params = std::move(captured);
  return true;
}

}  // namespace

Router::Router(Bank& bank) : bank_(bank) {
  auto add = [this](std::string method, std::string_view path, auto handler) {
    routes_.push_back(Route{std::move(method), split_path(path), handler});
  };

  add("GET", "/healthz", [](Bank& b, const Context&) {
    return json_response(200, {{"status", "ok"}, {"last_seq", b.last_seq()}});
  });

  add("POST", "/api/v1/session", [](Bank& b, const Context& c) {
    const json body = c.body();
    auto session = b.login(required_string(body, "username"), required_string(body, "password"));
    return json_response(201, render(session));
  });
  add("DELETE", "/api/v1/session", [](Bank& b, const Context& c) {
    b.logout(c.token());
    return json_response(200, {{"status", "ok"}});
  });

  add("GET", "/api/v1/accounts", [](Bank& b, const Context& c) {
    json accounts = json::array();
    for (const auto& a : b.list_accounts(c.token())) accounts.push_back(render_account(a));
    return json_response(200, {{"accounts", std::move(accounts)}});
  });
  add("GET", "/api/v1/accounts/*/balance", [](Bank& b, const Context& c) {
    return json_response(200, render_balance(c.params[0], b.balance(c.token(), c.params[0])));
  });
  add("GET", "/api/v1/accounts/*/transactions", [](Bank& b, const Context& c) {
    services::StatementQuery q;
    q.from_ts = c.query_int("from_ts");
    q.to_ts = c.query_int("to_ts");
    q.min_amount = c.query_int("min_amount");
    q.max_amount = c.query_int("max_amount");
    q.cursor = c.query("cursor");
    if (auto limit = c.query_int("limit")) {
      if (*limit < 1 || *limit > static_cast<std::int64_t>(ledger::kMaxPageSize)) {
        fail(ErrorCode::Validation, "limit must be between 1 and 100");
      }
      q.limit = static_cast<std::size_t>(*limit);
    }
    return json_response(200, render(b.view_statement(c.token(), c.params[0], q)));
  });

  add("POST", "/api/v1/payments/bill", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    auto receipt = b.pay_bill(token, required_string(body, "from_account"),
                              required_string(body, "biller_id"),
                              required_string(body, "reference"),
                              ledger::Money{required_int(body, "amount_minor")},
                              required_string(body, "idempotency_key"));
    return json_response(201, render(receipt));
  });
  add("POST", "/api/v1/transfers", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    auto receipt = b.transfer_funds(token, required_string(body, "from_account"),
                                    required_string(body, "to_account"),
                                    ledger::Money{required_int(body, "amount_minor")},
                                    optional_string(body, "memo").value_or(""),
                                    required_string(body, "idempotency_key"));
    return json_response(201, render(receipt));
  });

  add("POST", "/api/v1/cheques/book-requests", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    // Out-of-range values clamp to something the service rejects.
    const auto leaves = std::clamp<std::int64_t>(required_int(body, "leaves"), -1, 1000);
    auto r = b.request_cheque_book(token, required_string(body, "account_id"),
                                   static_cast<int>(leaves));
    return json_response(201, render(r));
  });
  add("POST", "/api/v1/cheques/stop-orders", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    auto o = b.stop_cheque(token, required_string(body, "account_id"),
                           required_string(body, "cheque_number"),
                           optional_string(body, "reason").value_or(""));
    return json_response(201, render(o));
  });

  add("POST", "/api/v1/profile/password", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    b.change_password(token, required_string(body, "old_password"),
                      required_string(body, "new_password"));
    return json_response(200, {{"status", "ok"}});
  });
  add("PUT", "/api/v1/profile/contact", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    services::ContactUpdate update{optional_string(body, "email"), optional_string(body, "phone"),
                                   optional_string(body, "postal_address")};
    return json_response(200, render(b.update_contact(token, update)));
  });

  add("GET", "/api/v1/billers", [](Bank& b, const Context& c) {
    json billers = json::array();
    for (const auto& biller : b.list_billers(c.token())) billers.push_back(render_public(biller));
    return json_response(200, {{"billers", std::move(billers)}});
  });

  add("POST", "/api/v1/admin/customers", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    services::NewCustomer profile{required_string(body, "username"),
                                  required_string(body, "full_name"),
                                  optional_string(body, "email").value_or(""),
                                  optional_string(body, "phone").value_or(""),
                                  optional_string(body, "postal_address").value_or("")};
    auto created =
        b.admin_create_customer(token, profile, required_string(body, "initial_password"));
    return json_response(201, render(created));
  });
  add("POST", "/api/v1/admin/accounts", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    const auto kind = ledger::parse_account_kind(
        optional_string(body, "kind").value_or("CUSTOMER_CHECKING"));
    std::int64_t deposit = 0;
    if (body.contains("opening_deposit_minor")) deposit = required_int(body, "opening_deposit_minor");
    auto account = b.admin_open_funded_account(token, required_string(body, "customer_id"), kind,
                                               ledger::Money{deposit});
    return json_response(201, render_account(account));
  });
  add("POST", "/api/v1/admin/accounts/*/status", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    const auto status = ledger::parse_account_status(required_string(body, "status"));
    return json_response(200, render_account(b.admin_set_account_status(token, c.params[0], status)));
  });
  add("POST", "/api/v1/admin/billers", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    return json_response(201, render_admin(b.admin_register_biller(token, required_string(body, "name"))));
  });
  add("POST", "/api/v1/admin/billers/*/retire", [](Bank& b, const Context& c) {
    return json_response(200, render_admin(b.admin_retire_biller(c.token(), c.params[0])));
  });
  add("POST", "/api/v1/admin/cheques/book-requests/*/decision", [](Bank& b, const Context& c) {
    const std::string token = c.token();
    b.authenticate(token);
    const json body = c.body();
    const auto decision = services::parse_cheque_status(required_string(body, "decision"));
    return json_response(200, render(b.admin_decide_cheque_request(token, c.params[0], decision)));
  });
}

Router::~Router() = default;

Response Router::handle(const Request& request) const {
  const auto path = split_path(request.path);
  const Route* found = nullptr;
  bool path_known = false;
  std::vector<std::string> params;
  for (const auto& route : routes_) {
    std::vector<std::string> p;
    if (!match(route.segments, path, p)) continue;
    path_known = true;
    if (route.method == request.method) {
      found = &route;
      params = std::move(p);
      break;
    }
  }
  if (!found) {
    return path_known ? error_response(ErrorCode::MethodNotAllowed, "method not allowed")
                      : error_response(ErrorCode::NotFound, "no such route");
  }
  try {
    return found->handler(bank_, Context{request, std::move(params)});
  } catch (const BankError& e) {
    return error_response(e.code(), e.what());
  } catch (const std::exception& e) {
    std::clog << "error: " << request.method << ' ' << request.path << ": " << e.what() << '\n';
    return error_response(ErrorCode::Internal, "internal error");
  }
}

}  // namespace bank::api
