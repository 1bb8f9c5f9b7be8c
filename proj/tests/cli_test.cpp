#include <gtest/gtest.h>

#include <httplib.h>
#include <sys/stat.h>

#include <sstream>

#include "bank/api.hpp"
#include "bank/cli.hpp"
#include "process.hpp"
#include "support.hpp"

namespace bank::cli {
namespace {

using nlohmann::json;
using testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

// In-process server with an admin and a funded customer.
struct Live {
  TempDir dir;
  testing::ManualClock clock;
  std::unique_ptr<services::Bank> bank =
      services::Bank::in_memory(clock.clock(), seeded_random(4), testing::fast_policy());
  api::Server server{*bank};
  std::string session = (dir.path / "session.json").string();

  Live() {
    bank->bootstrap_admin("root", "root-password");
    auto admin = bank->login("root", "root-password").token;
    bank->admin_create_customer(admin, {"alice", "Alice", "", "", ""}, "alice-password");
    bank->admin_open_funded_account(admin, "CUS-000001", ledger::AccountKind::CustomerChecking, {100000});
    bank->admin_open_funded_account(admin, "CUS-000001", ledger::AccountKind::CustomerSavings, {0});
    bank->admin_register_biller(admin, "City Power");
    EXPECT_TRUE(server.bind("127.0.0.1", 0));
    server.start();
  }
  ~Live() { server.stop(); }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(server.port()); }

  Outcome cli(std::vector<std::string> args, const std::string& input = "") {
    args.insert(args.begin(), {"--server", url(), "--session-file", session});
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = run(args, in, out, err);
    return {code, out.str(), err.str()};
  }

  std::string raw(const std::string& method, const std::string& path, const std::string& body = "") {
    httplib::Client c("127.0.0.1", server.port());
    const auto token = json::parse(testing::slurp(session)).at("token").get<std::string>();
    httplib::Headers h{{"Authorization", "Bearer " + token}};
    auto r = method == "GET" ? c.Get(path, h) : method == "PUT" ? c.Put(path, h, body, "application/json")
                                                                : c.Post(path, h, body, "application/json");
    return r ? r->body : "<no response>";
  }
};

TEST(Cli, LoginWritesOwnerOnlySessionFile) {
  Live live;
  auto r = live.cli({"login", "--user", "alice"}, "alice-password\n");
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("logged in as alice"), std::string::npos);
  struct stat st {};
  ASSERT_EQ(::stat(live.session.c_str(), &st), 0);
  EXPECT_EQ(st.st_mode & 0777, 0600);
  const auto s = json::parse(testing::slurp(live.session));
  EXPECT_EQ(s.at("server_url"), live.url());
  EXPECT_EQ(s.at("token").get<std::string>().size(), 64u);
}

TEST(Cli, WrongPasswordExitsOneWithEnvelope) {
  Live live;
  auto r = live.cli({"login", "--user", "alice"}, "nope-nope\n");
  EXPECT_EQ(r.code, kApiError);
  EXPECT_NE(r.err.find("BAD_CREDENTIALS"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(live.session));
}

TEST(Cli, NoSessionIsUnauthenticated) {
  Live live;
  auto r = live.cli({"transfer", "--from", "ACC-000002", "--to", "ACC-000003", "--amount", "1"});
  EXPECT_EQ(r.code, kApiError);
  EXPECT_NE(r.err.find("UNAUTHENTICATED"), std::string::npos);
  r = live.cli({"transfer"});
  EXPECT_EQ(r.code, kApiError);
}

TEST(Cli, UsageErrorsExitTwo) {
  Live live;
  auto r = live.cli({"frobnicate"});
  EXPECT_EQ(r.code, kUsage);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  // Passwords are never accepted as arguments.
  EXPECT_EQ(live.cli({"login", "--user", "alice", "--password", "alice-password"}).code, kUsage);
  live.cli({"login", "--user", "alice"}, "alice-password\n");
  EXPECT_EQ(live.cli({"transfer", "--to", "ACC-000003", "--amount", "5"}).code, kUsage);
  EXPECT_EQ(live.cli({"transfer", "--from", "A", "--to", "B", "--amount", "five"}).code, kUsage);
}

TEST(Cli, JsonOutputIsTheRawBody) {
  Live live;
  ASSERT_EQ(live.cli({"login", "--user", "alice"}, "alice-password\n").code, kOk);
  auto r = live.cli({"--json", "balance", "ACC-000002"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(r.out, R"({"account_id":"ACC-000002","amount_minor":100000})" "\n");
  EXPECT_EQ(r.out, live.raw("GET", "/api/v1/accounts/ACC-000002/balance") + "\n");

  auto t = live.cli({"--json", "transfer", "--from", "ACC-000002", "--to", "ACC-000003", "--amount", "2500",
                     "--memo", "rent", "--key", "cli-1"});
  ASSERT_EQ(t.code, kOk) << t.err;
  const std::string replay = live.raw("POST", "/api/v1/transfers",
                                      R"({"from_account":"ACC-000002","to_account":"ACC-000003","amount_minor":2500,"memo":"rent","idempotency_key":"cli-1"})");
  EXPECT_EQ(t.out, replay + "\n");
  EXPECT_EQ(live.cli({"--json", "accounts"}).out, live.raw("GET", "/api/v1/accounts") + "\n");
}

TEST(Cli, HumanOutput) {
  Live live;
  live.cli({"login", "--user", "alice"}, "alice-password\n");
  auto t = live.cli({"transfer", "--from", "ACC-000002", "--to", "ACC-000003", "--amount", "12345"});
  ASSERT_EQ(t.code, kOk) << t.err;
  EXPECT_NE(t.out.find("123.45 from ACC-000002 to ACC-000003"), std::string::npos) << t.out;
  auto s = live.cli({"statement", "ACC-000002", "--limit", "1"});
  EXPECT_EQ(s.code, kOk);
  EXPECT_NE(s.out.find("more: --cursor TX-"), std::string::npos) << s.out;
  auto b = live.cli({"billers"});
  EXPECT_NE(b.out.find("BIL-0001  City Power"), std::string::npos) << b.out;
}

TEST(Cli, LogoutDeletesSessionFile) {
  Live live;
  live.cli({"login", "--user", "alice"}, "alice-password\n");
  ASSERT_TRUE(std::filesystem::exists(live.session));
  EXPECT_EQ(live.cli({"logout"}).code, kOk);
  EXPECT_FALSE(std::filesystem::exists(live.session));
  EXPECT_EQ(live.cli({"accounts"}).code, kApiError);
}

TEST(Cli, PasswordFromStdin) {
  Live live;
  live.cli({"login", "--user", "alice"}, "alice-password\n");
  auto r = live.cli({"password"}, "alice-password\nbrand-new-pass\n");
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_EQ(live.cli({"login", "--user", "alice"}, "brand-new-pass\n").code, kOk);
  EXPECT_EQ(live.cli({"password"}, "only-one-line\n").code, kUsage);
}

TEST(Cli, NetworkFailureIsDistinct) {
  TempDir dir;
  const std::string session = (dir.path / "s.json").string();
  testing::spit(session, R"({"server_url":"http://127.0.0.1:1","token":"x"})");
  std::istringstream in;
  std::ostringstream out, err;
  const int code = run({"--session-file", session, "accounts"}, in, out, err);
  EXPECT_EQ(code, kApiError);
  EXPECT_NE(err.str().find("network error"), std::string::npos);
  EXPECT_EQ(err.str().find("\"error\""), std::string::npos);
}

// The real binaries, end to end.
TEST(Binaries, DaemonAndClientSmoke) {
  TempDir dir;
  testing::spit(dir.path / "bank.conf", "snapshot_every = 5\nhash_params = pbkdf2-sha256-1k\n");
  const std::map<std::string, std::string> env{{"BANK_CONFIG", (dir.path / "bank.conf").string()},
                                               {"BANK_ADMIN_PASSWORD", "root-password"}};
  const std::string session = (dir.path / "s.json").string();
  {
    testing::Daemon d(BANKD_PATH, {"--data-dir", (dir.path / "data").string(), "--admin-user", "root"}, env);
    auto cli = [&](std::vector<std::string> args, const std::string& input = "") {
      args.insert(args.begin(), {BANK_CLI_PATH, "--server", d.url(), "--session-file", session});
      return testing::run_process(args, input);
    };
    ASSERT_EQ(cli({"login", "--user", "root"}, "root-password\n").exit_code, 0);
    EXPECT_EQ(cli({"admin", "customer-create", "--username", "alice", "--name", "Alice"}, "alice-password\n").exit_code, 0);
    auto open = cli({"--json", "admin", "account-open", "--customer", "CUS-000001", "--deposit", "100000"});
    EXPECT_EQ(open.exit_code, 0) << open.err;
    EXPECT_EQ(cli({"frobnicate"}).exit_code, 2);
    auto stopped = d.stop();
    EXPECT_EQ(stopped.exit_code, 0) << stopped.err;
  }
  // Restart on the same data dir: state is recovered, the port check works.
  testing::Daemon d(BANKD_PATH, {"--data-dir", (dir.path / "data").string()}, env);
  httplib::Client c("127.0.0.1", d.port);
  auto h = c.Get("/healthz");
  ASSERT_TRUE(h);
  EXPECT_NE(h->body.find("\"last_seq\":"), std::string::npos);
  EXPECT_NE(h->body, R"({"last_seq":0,"status":"ok"})");
  auto clash = testing::run_process({BANKD_PATH, "--listen-port", std::to_string(d.port), "--data-dir",
                                     (dir.path / "other").string()});
  EXPECT_NE(clash.exit_code, 0);
  EXPECT_NE(clash.err.find("cannot bind"), std::string::npos);
  d.stop();

  testing::spit(dir.path / "bad.conf", "colour = blue\n");
  auto bad = testing::run_process({BANKD_PATH, "--config", (dir.path / "bad.conf").string()});
  EXPECT_NE(bad.exit_code, 0);
  EXPECT_NE(bad.err.find("unknown config key"), std::string::npos);
}

TEST(Binaries, CorruptJournalAbortsStartup) {
  TempDir dir;
  {
    testing::Daemon d(BANKD_PATH, {"--data-dir", dir.path.string(), "--admin-user", "root", "--set",
                                   "hash_params=pbkdf2-sha256-1k"},
                      {{"BANK_ADMIN_PASSWORD", "root-password"}});
    d.stop();
  }
  auto bytes = testing::slurp(dir.path / "journal.log");
  ASSERT_GE(testing::split_lines(bytes).size(), 2u);
  bytes[10] ^= 0x01;
  testing::spit(dir.path / "journal.log", bytes);
  auto r = testing::run_process({BANKD_PATH, "--listen-port", "0", "--data-dir", dir.path.string()});
  EXPECT_NE(r.exit_code, 0);
  EXPECT_NE(r.err.find("corrupt at seq 1"), std::string::npos) << r.err;
}

}  // namespace
}  // namespace bank::cli
