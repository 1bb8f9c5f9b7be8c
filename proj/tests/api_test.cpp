#include <gtest/gtest.h>

#include <httplib.h>

#include <random>
#include <set>

#include "bank/api.hpp"
#include "support.hpp"

namespace bank::api {
namespace {

using services::Bank;
using testing::ManualClock;

Request req(std::string method, std::string path, std::string token = {}, std::string body = {}) {
  Request r;
  r.method = std::move(method);
  r.path = std::move(path);
  if (!token.empty()) r.authorization = "Bearer " + token;
  r.body = std::move(body);
  return r;
}

std::string error_code(const Response& r) { return json::parse(r.body).at("error").at("code"); }

struct Api {
  ManualClock clock;
  std::unique_ptr<Bank> bank = Bank::in_memory(clock.clock(), seeded_random(3), testing::fast_policy());
  Router router{*bank};
  std::string admin, alice;

  Api() {
    bank->bootstrap_admin("root", "root-password");
    admin = token("root", "root-password");
    call("POST", "/api/v1/admin/customers", admin,
         R"({"username":"alice","full_name":"Alice","email":"a@example.com","initial_password":"alice-password"})");
    call("POST", "/api/v1/admin/customers", admin,
         R"({"username":"bob","full_name":"Bob","initial_password":"bob-password"})");
    call("POST", "/api/v1/admin/accounts", admin, R"({"customer_id":"CUS-000001","opening_deposit_minor":100000})");
    call("POST", "/api/v1/admin/accounts", admin, R"({"customer_id":"CUS-000002","kind":"CUSTOMER_SAVINGS"})");
    call("POST", "/api/v1/admin/billers", admin, R"({"name":"City Power"})");
    alice = token("alice", "alice-password");
  }

  Response call(std::string method, std::string path, std::string tok = {}, std::string body = {}) {
    return router.handle(req(std::move(method), std::move(path), std::move(tok), std::move(body)));
  }

  std::string token(const std::string& user, const std::string& pw) {
    auto r = call("POST", "/api/v1/session", {}, json{{"username", user}, {"password", pw}}.dump());
    EXPECT_EQ(r.status, 201) << r.body;
    return json::parse(r.body).at("token");
  }
};

TEST(Router, HealthAndRouting) {
  Api a;
  auto h = a.call("GET", "/healthz");
  EXPECT_EQ(h.status, 200);
  EXPECT_EQ(h.body, R"({"last_seq":)" + std::to_string(a.bank->last_seq()) + R"(,"status":"ok"})");
  EXPECT_EQ(a.call("GET", "/api/v1/nothing").status, 404);
  EXPECT_EQ(error_code(a.call("GET", "/api/v1/nothing")), "NOT_FOUND");
  EXPECT_EQ(a.call("GET", "/api/v1/transfers").status, 405);
  EXPECT_EQ(error_code(a.call("PUT", "/api/v1/session")), "METHOD_NOT_ALLOWED");
}

TEST(Router, AuthBeforeBody) {
  Api a;
  auto r = a.call("POST", "/api/v1/transfers", {}, "{not json");
  EXPECT_EQ(r.status, 401);
  EXPECT_EQ(error_code(r), "UNAUTHENTICATED");
  r = a.call("POST", "/api/v1/transfers", a.alice, "{not json");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(error_code(r), "MALFORMED_JSON");
  r = a.call("POST", "/api/v1/transfers", a.alice, "[1,2]");
  EXPECT_EQ(r.status, 400);
  r = a.call("POST", "/api/v1/transfers", a.alice, R"({"from_account":"ACC-000002"})");
  EXPECT_EQ(r.status, 422);
  r = a.call("POST", "/api/v1/transfers", a.alice,
             R"({"from_account":"ACC-000002","to_account":"ACC-000003","amount_minor":"12","idempotency_key":"k"})");
  EXPECT_EQ(r.status, 422);
}

TEST(Router, StatusMapping) {
  Api a;
  auto transfer = [&](std::int64_t amount, const std::string& key, const std::string& to = "ACC-000003") {
    return a.call("POST", "/api/v1/transfers", a.alice,
                  json{{"from_account", "ACC-000002"}, {"to_account", to}, {"amount_minor", amount}, {"idempotency_key", key}}.dump());
  };
  EXPECT_EQ(transfer(100, "a").status, 201);
  EXPECT_EQ(transfer(10'000'000, "b").status, 409);
  EXPECT_EQ(error_code(transfer(10'000'000, "b")), "INSUFFICIENT_FUNDS");
  EXPECT_EQ(transfer(1, "c", "ACC-000002").status, 409);
  EXPECT_EQ(transfer(1, "d", "ACC-000777").status, 404);
  EXPECT_EQ(a.call("GET", "/api/v1/accounts/ACC-000003/balance", a.alice).status, 403);
  EXPECT_EQ(a.call("POST", "/api/v1/admin/billers", a.alice, R"({"name":"x"})").status, 403);
  auto bad = a.call("POST", "/api/v1/session", {}, R"({"username":"alice","password":"wrong-password"})");
  EXPECT_EQ(bad.status, 401);
  EXPECT_EQ(error_code(bad), "BAD_CREDENTIALS");
  for (const char* limit : {"0", "101", "abc", ""}) {
    Request q = req("GET", "/api/v1/accounts/ACC-000002/transactions", a.alice);
    q.query.emplace("limit", limit);
    EXPECT_EQ(a.router.handle(q).status, 422) << limit;
  }
}

TEST(Router, LockoutReturns423) {
  Api a;
  const std::string wrong = R"({"username":"alice","password":"wrong-password"})";
  for (int i = 0; i < 5; ++i) EXPECT_EQ(a.call("POST", "/api/v1/session", {}, wrong).status, 401);
  auto r = a.call("POST", "/api/v1/session", {}, R"({"username":"alice","password":"alice-password"})");
  EXPECT_EQ(r.status, 423);
  EXPECT_EQ(error_code(r), "LOCKED_OUT");
}

TEST(Router, StatementPaginationOverHttpShape) {
  Api a;
  for (int i = 0; i < 5; ++i) {
    a.call("POST", "/api/v1/transfers", a.alice,
           json{{"from_account", "ACC-000002"}, {"to_account", "ACC-000003"}, {"amount_minor", 10 + i}, {"idempotency_key", "p" + std::to_string(i)}}.dump());
  }
  Request q = req("GET", "/api/v1/accounts/ACC-000002/transactions", a.alice);
  q.query.emplace("limit", "4");
  auto page1 = json::parse(a.router.handle(q).body);
  ASSERT_EQ(page1.at("lines").size(), 4u);
  ASSERT_TRUE(page1.contains("next_cursor"));
  q.query.emplace("cursor", page1["next_cursor"].get<std::string>());
  auto page2 = json::parse(a.router.handle(q).body);
  ASSERT_EQ(page2.at("lines").size(), 2u);
  EXPECT_FALSE(page2.contains("next_cursor"));
  EXPECT_EQ(page2["lines"][1]["running_balance_minor"], 100000 - (10 + 11 + 12 + 13 + 14));
}

// Drives one bank through the router and a twin directly through the service
// layer with identical inputs; every (status, body) pair must agree.
TEST(Property, ApiServiceParity) {
  ManualClock clock_a, clock_b;
  auto bank_a = Bank::in_memory(clock_a.clock(), seeded_random(8), testing::fast_policy());
  auto bank_b = Bank::in_memory(clock_b.clock(), seeded_random(8), testing::fast_policy());
  Router router(*bank_a);
  bank_a->bootstrap_admin("root", "root-password");
  bank_b->bootstrap_admin("root", "root-password");

  auto direct = [](auto&& f, int status) -> Response {
    try {
      return json_response(status, f());
    } catch (const BankError& e) {
      return error_response(e.code(), e.what());
    }
  };

  std::mt19937_64 rng(12);
  std::vector<std::string> tokens;
  auto pick_token = [&]() -> std::string {
    if (tokens.empty() || rng() % 10 == 0) return "junk";
    return tokens[rng() % tokens.size()];
  };
  auto acct = [&] { return ledger::format_account_id(1 + rng() % 7); };
  const std::vector<std::string> users{"root", "alice", "bob", "carol"};

  for (int step = 0; step < 400; ++step) {
    Response via_api, via_service;
    const int op = static_cast<int>(rng() % 9);
    if (op == 0) {
      const auto& u = users[rng() % users.size()];
      const std::string pw = rng() % 4 ? (u == "root" ? "root-password" : u + "-password") : "bad-password";
      via_api = router.handle(req("POST", "/api/v1/session", {}, json{{"username", u}, {"password", pw}}.dump()));
      via_service = direct([&] { return render(bank_b->login(u, pw)); }, 201);
      if (via_api.status == 201) tokens.push_back(json::parse(via_api.body).at("token"));
    } else if (op == 1) {
      const std::string t = pick_token();
      const std::string u = users[1 + rng() % 3];
      const std::string body = json{{"username", u}, {"full_name", u}, {"initial_password", u + "-password"}}.dump();
      via_api = router.handle(req("POST", "/api/v1/admin/customers", t, body));
      via_service = direct([&] { return render(bank_b->admin_create_customer(t, {u, u, "", "", ""}, u + "-password")); }, 201);
    } else if (op == 2) {
      const std::string t = pick_token();
      const std::string cus = "CUS-00000" + std::to_string(1 + rng() % 3);
      const std::int64_t dep = static_cast<std::int64_t>(rng() % 50000);
      via_api = router.handle(req("POST", "/api/v1/admin/accounts", t,
                                  json{{"customer_id", cus}, {"opening_deposit_minor", dep}}.dump()));
      via_service = direct([&] {
        return render_account(bank_b->admin_open_funded_account(t, cus, ledger::AccountKind::CustomerChecking, {dep}));
      }, 201);
    } else if (op == 3) {
      const std::string t = pick_token();
      const std::string from = acct(), to = acct(), key = "k" + std::to_string(rng() % 40);
      const std::int64_t amount = static_cast<std::int64_t>(rng() % 20000) - 10;
      via_api = router.handle(req("POST", "/api/v1/transfers", t,
                                  json{{"from_account", from}, {"to_account", to}, {"amount_minor", amount},
                                       {"memo", "m"}, {"idempotency_key", key}}.dump()));
      via_service = direct([&] { return render(bank_b->transfer_funds(t, from, to, {amount}, "m", key)); }, 201);
    } else if (op == 4) {
      const std::string t = pick_token();
      if (rng() % 3 == 0) {
        via_api = router.handle(req("POST", "/api/v1/admin/billers", t, R"({"name":"Water"})"));
        via_service = direct([&] { return render_admin(bank_b->admin_register_biller(t, "Water")); }, 201);
      } else {
        const std::string from = acct(), key = "b" + std::to_string(rng() % 40);
        const std::int64_t amount = 1 + static_cast<std::int64_t>(rng() % 5000);
        via_api = router.handle(req("POST", "/api/v1/payments/bill", t,
                                    json{{"from_account", from}, {"biller_id", "BIL-0001"}, {"reference", "R"},
                                         {"amount_minor", amount}, {"idempotency_key", key}}.dump()));
        via_service = direct([&] { return render(bank_b->pay_bill(t, from, "BIL-0001", "R", {amount}, key)); }, 201);
      }
    } else if (op == 5) {
      const std::string t = pick_token(), a = acct();
      via_api = router.handle(req("GET", "/api/v1/accounts/" + a + "/balance", t));
      via_service = direct([&] { return render_balance(a, bank_b->balance(t, a)); }, 200);
    } else if (op == 6) {
      const std::string t = pick_token(), a = acct();
      Request r = req("GET", "/api/v1/accounts/" + a + "/transactions", t);
      r.query.emplace("limit", "3");
      via_api = router.handle(r);
      services::StatementQuery q;
      q.limit = 3;
      via_service = direct([&] { return render(bank_b->view_statement(t, a, q)); }, 200);
    } else if (op == 7) {
      const std::string t = pick_token(), a = acct();
      const auto status = rng() % 2 ? ledger::AccountStatus::Frozen : ledger::AccountStatus::Active;
      via_api = router.handle(req("POST", "/api/v1/admin/accounts/" + a + "/status", t,
                                  json{{"status", ledger::to_string(status)}}.dump()));
      via_service = direct([&] { return render_account(bank_b->admin_set_account_status(t, a, status)); }, 200);
    } else {
      const std::string t = pick_token(), a = acct();
      const int leaves = rng() % 2 ? 25 : 30;
      via_api = router.handle(req("POST", "/api/v1/cheques/book-requests", t,
                                  json{{"account_id", a}, {"leaves", leaves}}.dump()));
      via_service = direct([&] { return render(bank_b->request_cheque_book(t, a, leaves)); }, 201);
    }
    ASSERT_EQ(via_api, via_service) << "step " << step << " op " << op;
    clock_a.advance(1000);
    clock_b.advance(1000);
  }
  EXPECT_EQ(bank_a->journal_bytes(), bank_b->journal_bytes());
  EXPECT_GT(bank_a->last_seq(), 100u);
}

void collect_keys(const json& j, std::set<std::string>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      out.insert(it.key());
      collect_keys(it.value(), out);
    }
  } else if (j.is_array()) {
    for (const auto& e : j) collect_keys(e, out);
  }
}

// Every key a customer can see must be on this list.
TEST(Router, CustomerResponsesStayOnAllowlist) {
  Api a;
  const std::set<std::string> allowed{
      "token", "principal_id", "role", "idle_ttl_s", "accounts", "account_id", "owner", "kind", "status",
      "amount_minor", "lines", "tx_id", "timestamp", "running_balance_minor", "memo", "next_cursor",
      "from_account", "counterparty", "billers", "biller_id", "name", "request_id", "leaves", "requested_ts",
      "decided_ts", "order_id", "cheque_number", "reason", "customer_id", "username", "full_name", "email",
      "phone", "postal_address", "error", "code", "message", "last_seq"};
  std::vector<Response> seen;
  seen.push_back(a.call("POST", "/api/v1/session", {}, R"({"username":"alice","password":"alice-password"})"));
  seen.push_back(a.call("GET", "/api/v1/accounts", a.alice));
  seen.push_back(a.call("GET", "/api/v1/accounts/ACC-000002/balance", a.alice));
  seen.push_back(a.call("POST", "/api/v1/transfers", a.alice,
                        R"({"from_account":"ACC-000002","to_account":"ACC-000003","amount_minor":5,"idempotency_key":"x"})"));
  seen.push_back(a.call("POST", "/api/v1/payments/bill", a.alice,
                        R"({"from_account":"ACC-000002","biller_id":"BIL-0001","reference":"R1","amount_minor":5,"idempotency_key":"y"})"));
  seen.push_back(a.call("GET", "/api/v1/accounts/ACC-000002/transactions", a.alice));
  seen.push_back(a.call("GET", "/api/v1/billers", a.alice));
  seen.push_back(a.call("POST", "/api/v1/cheques/book-requests", a.alice, R"({"account_id":"ACC-000002","leaves":25})"));
  seen.push_back(a.call("POST", "/api/v1/cheques/stop-orders", a.alice, R"({"account_id":"ACC-000002","cheque_number":"000001"})"));
  seen.push_back(a.call("PUT", "/api/v1/profile/contact", a.alice, R"({"phone":"1"})"));
  seen.push_back(a.call("POST", "/api/v1/profile/password", a.alice,
                        R"({"old_password":"alice-password","new_password":"alice-password-2"})"));
  seen.push_back(a.call("GET", "/api/v1/accounts/ACC-000003/balance", a.alice));
  seen.push_back(a.call("GET", "/healthz"));
  std::set<std::string> keys;
  for (const auto& r : seen) {
    EXPECT_LT(r.status, 500) << r.body;
    collect_keys(json::parse(r.body), keys);
    EXPECT_EQ(r.body.find("alice-password"), std::string::npos);
  }
  for (const auto& k : keys) EXPECT_TRUE(allowed.count(k)) << "unexpected key " << k;
  for (const char* forbidden : {"salt", "password_hash", "hash_params", "settlement_account_id", "password"}) {
    EXPECT_FALSE(keys.count(forbidden)) << forbidden;
  }
  // Admins see the settlement account.
  auto admin_billers = a.call("POST", "/api/v1/admin/billers", a.admin, R"({"name":"Gas"})");
  EXPECT_TRUE(json::parse(admin_billers.body).contains("settlement_account_id"));
}

TEST(Router, UnknownUserAndWrongPasswordBodiesMatch) {
  Api a;
  auto x = a.call("POST", "/api/v1/session", {}, R"({"username":"ghost","password":"whatever-1"})");
  auto y = a.call("POST", "/api/v1/session", {}, R"({"username":"alice","password":"whatever-1"})");
  EXPECT_EQ(x, y);
}

TEST(Config, DefaultsAndParsing) {
  auto c = parse_config("# comment\nlisten_port = 9000\n\ndata_dir=/tmp/x # trailing\nlockout_threshold=3\n");
  EXPECT_EQ(c.listen_port, 9000);
  EXPECT_EQ(c.data_dir, "/tmp/x");
  EXPECT_EQ(c.lockout_threshold, 3);
  EXPECT_EQ(c.session_idle_ttl_s, 900);
  EXPECT_EQ(c.snapshot_every, 1000u);
  auto o = bank_options(c);
  EXPECT_EQ(o.auth_policy.lockout_threshold, 3);
  EXPECT_EQ(o.auth_policy.idle_ttl_ms, 900'000);
  EXPECT_EQ(o.snapshot_every, 1000u);
  EXPECT_EQ(parse_config("").listen_port, 8475);
}

TEST(Config, RejectsBadInput) {
  for (const char* text : {"colour = blue", "listen_port = 0", "lockout_window_s = -5", "snapshot_every = x",
                           "listen_port = 70000", "just words", "hash_params = md5"}) {
    try {
      (void)parse_config(text);
      ADD_FAILURE() << text;
    } catch (const BankError& e) {
      EXPECT_EQ(e.code(), ErrorCode::Validation) << text;
    }
  }
}

TEST(Server, ServesOverHttp) {
  Api a;
  Server server(*a.bank);
  ASSERT_TRUE(server.bind("127.0.0.1", 0));
  server.start();
  httplib::Client client("127.0.0.1", server.port());
  auto h = client.Get("/healthz");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(h->get_header_value("Content-Type"), "application/json");
  auto r = client.Post("/api/v1/transfers", R"({})", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 401);
  httplib::Headers auth{{"Authorization", "Bearer " + a.alice}};
  auto b = client.Get("/api/v1/accounts/ACC-000002/balance", auth);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->body, R"({"account_id":"ACC-000002","amount_minor":100000})");
  auto del = client.Delete("/api/v1/session", auth);
  ASSERT_TRUE(del);
  EXPECT_EQ(del->status, 200);
  EXPECT_EQ(client.Get("/api/v1/accounts", auth)->status, 401);

  Server second(*a.bank);
  EXPECT_FALSE(second.bind("127.0.0.1", server.port()));
  server.stop();
}

}  // namespace
}  // namespace bank::api
