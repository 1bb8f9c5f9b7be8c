#include "bank/cli.hpp"

#include <fcntl.h>
#include <termios.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bank::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kDefaultServer = "http://localhost:8475";

struct SessionFile {
  std::string server_url;
  std::string token;
};

fs::path default_session_path() {
  if (const char* p = std::getenv("BANK_SESSION_FILE"); p && *p) return p;
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".bank_session";
  return ".bank_session";
}

std::optional<SessionFile> load_session(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("token") || !j["token"].is_string()) {
    return std::nullopt;
  }
  return SessionFile{j.value("server_url", ""), j["token"].get<std::string>()};
}

bool save_session(const fs::path& path, const SessionFile& s) {
  const std::string data = json{{"server_url", s.server_url}, {"token", s.token}}.dump() + "\n";
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) return false;
  (void)::fchmod(fd, 0600);
  const bool ok = ::write(fd, data.data(), data.size()) == static_cast<ssize_t>(data.size());
  ::close(fd);
  return ok;
}

std::string random_key() {
  std::random_device rd;
  std::ostringstream out;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", rd());
    out << buf;
  }
  return out.str();
}

// Reads one line; disables terminal echo when reading an interactive stdin.
std::optional<std::string> read_secret(std::istream& in, std::ostream& err, const char* prompt) {
  const bool tty = &in == &std::cin && ::isatty(STDIN_FILENO);
  termios saved{};
  if (tty) {
    err << prompt << std::flush;
    ::tcgetattr(STDIN_FILENO, &saved);
    termios quiet = saved;
    quiet.c_lflag &= ~static_cast<tcflag_t>(ECHO);
    ::tcsetattr(STDIN_FILENO, TCSANOW, &quiet);
  }
  std::string line;
  const bool got = static_cast<bool>(std::getline(in, line));
  if (tty) {
    ::tcsetattr(STDIN_FILENO, TCSANOW, &saved);
    err << '\n';
  }
  if (!got) return std::nullopt;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string url_encode(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

std::string format_minor(std::int64_t minor) {
  const bool negative = minor < 0;
  const std::uint64_t abs = negative ? 0 - static_cast<std::uint64_t>(minor) : minor;
  std::string whole = std::to_string(abs / 100);
  for (int i = static_cast<int>(whole.size()) - 3; i > 0; i -= 3) whole.insert(i, ",");
  char frac[4];
  std::snprintf(frac, sizeof frac, "%02llu", static_cast<unsigned long long>(abs % 100));
  return (negative ? "-" : "") + whole + "." + frac;
}

struct ApiResult {
  int status = 0;
  std::string body;
};

class Invocation {
 public:
  Invocation(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  std::string server;
  bool json_output = false;
  std::string session_path;

  std::optional<SessionFile> session;

  std::string server_url() const {
    if (!server.empty()) return server;
    if (const char* env = std::getenv("BANK_SERVER"); env && *env) return env;
    if (session && !session->server_url.empty()) return session->server_url;
    return kDefaultServer;
  }

  // Sends a request; nullopt after reporting a network failure.
  std::optional<ApiResult> call(const std::string& method, const std::string& path,
                                const std::optional<json>& body) {
    httplib::Client client(server_url());
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    httplib::Headers headers;
    if (session) headers.emplace("Authorization", "Bearer " + session->token);
    const std::string payload = body ? body->dump() : std::string();
    httplib::Result res;
    if (method == "GET") res = client.Get(path, headers);
    else if (method == "POST") res = client.Post(path, headers, payload, "application/json");
    else if (method == "PUT") res = client.Put(path, headers, payload, "application/json");
    else res = client.Delete(path, headers);
    if (!res) {
      err_ << "network error: cannot reach " << server_url() << " ("
           << httplib::to_string(res.error()) << ")\n";
      return std::nullopt;
    }
    return ApiResult{res->status, res->body};
  }

  // Prints the body (raw with --json, else via `human`) and maps to an exit code.
  int finish(const std::optional<ApiResult>& r, const std::function<void(const json&)>& human) {
    if (!r) return kApiError;
    if (r->status < 200 || r->status >= 300) {
      err_ << r->body << '\n';
      return kApiError;
    }
    if (json_output) {
      out_ << r->body << '\n';
    } else {
      json j = json::parse(r->body, nullptr, false);
      if (j.is_discarded()) out_ << r->body << '\n';
      else human(j);
    }
    return kOk;
  }

  int unauthenticated() {
    err_ << json{{"error",
                  {{"code", "UNAUTHENTICATED"},
                   {"message", "no session; run `bank login` first"}}}}
                .dump()
         << '\n';
    return kApiError;
  }

  int usage(const std::string& message) {
    err_ << "usage error: " << message << '\n';
    return kUsage;
  }

  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }

 private:
  std::ostream& out_;
  std::ostream& err_;
};

void print_receipt(std::ostream& out, const json& r) {
  out << "tx " << r.value("tx_id", "") << ": " << r.value("kind", "") << ' '
      << format_minor(r.value("amount_minor", std::int64_t{0})) << " from "
      << r.value("from_account", "") << " to " << r.value("counterparty", "");
  if (const auto memo = r.value("memo", std::string()); !memo.empty()) out << " (" << memo << ')';
  out << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  Invocation inv(out, err);
  CLI::App app{"Internet banking command-line client", "bank"};
  app.require_subcommand(1);
  app.add_option("--server", inv.server, "Server URL (env BANK_SERVER)");
  app.add_flag("--json", inv.json_output, "Print raw JSON response bodies");
  app.add_option("--session-file", inv.session_path, "Session file path");

  // Field storage for every subcommand; CLI11 binds to these.
  std::string user, account, from, to, memo, key, biller, ref, number, reason, cursor;
  std::string email, phone, address, username, full_name, customer, kind = "CUSTOMER_CHECKING";
  std::string name, decision, status = "FROZEN", request_id;
  std::optional<std::int64_t> amount, leaves, deposit, from_ts, to_ts, min_amount, max_amount, limit;

  auto* login = app.add_subcommand("login", "Start a session (password read from stdin)");
  login->add_option("--user", user, "Username");
  auto* logout = app.add_subcommand("logout", "End the session and delete the session file");
  auto* accounts = app.add_subcommand("accounts", "List accounts");
  auto* balance = app.add_subcommand("balance", "Show an account balance");
  balance->add_option("account", account, "Account id");
  auto* statement = app.add_subcommand("statement", "Show account transactions");
  statement->add_option("account", account, "Account id");
  statement->add_option("--from-ts", from_ts, "Earliest timestamp (UTC ms)");
  statement->add_option("--to-ts", to_ts, "Latest timestamp (UTC ms)");
  statement->add_option("--min", min_amount, "Minimum amount (minor units)");
  statement->add_option("--max", max_amount, "Maximum amount (minor units)");
  statement->add_option("--cursor", cursor, "Continue after this tx id");
  statement->add_option("--limit", limit, "Page size (1-100)");
  auto* transfer = app.add_subcommand("transfer", "Transfer funds between accounts");
  transfer->add_option("--from", from, "Source account");
  transfer->add_option("--to", to, "Destination account");
  transfer->add_option("--amount", amount, "Amount in minor units");
  transfer->add_option("--memo", memo, "Memo");
  transfer->add_option("--key", key, "Idempotency key (random if omitted)");
  auto* paybill = app.add_subcommand("paybill", "Pay a registered biller");
  paybill->add_option("--from", from, "Source account");
  paybill->add_option("--biller", biller, "Biller id");
  paybill->add_option("--ref", ref, "Bill reference");
  paybill->add_option("--amount", amount, "Amount in minor units");
  paybill->add_option("--key", key, "Idempotency key (random if omitted)");
  auto* billers = app.add_subcommand("billers", "List billers");

  auto* cheque = app.add_subcommand("cheque", "Cheque services");
  cheque->require_subcommand(1);
  auto* cheque_request = cheque->add_subcommand("request", "Request a cheque book");
  cheque_request->add_option("--account", account, "Account id");
  cheque_request->add_option("--leaves", leaves, "25, 50, or 100");
  auto* cheque_stop = cheque->add_subcommand("stop", "Stop a cheque");
  cheque_stop->add_option("--account", account, "Account id");
  cheque_stop->add_option("--number", number, "6-digit cheque number");
  cheque_stop->add_option("--reason", reason, "Reason");

  auto* password = app.add_subcommand(
      "password", "Change password (old and new password read from stdin, one per line)");
  auto* contact = app.add_subcommand("contact", "Update contact details");
  auto* email_opt = contact->add_option("--email", email, "Email address");
  auto* phone_opt = contact->add_option("--phone", phone, "Phone number");
  auto* address_opt = contact->add_option("--address", address, "Postal address");

  auto* admin = app.add_subcommand("admin", "Administrator commands");
  admin->require_subcommand(1);
  auto* customer_create =
      admin->add_subcommand("customer-create", "Create a customer (password read from stdin)");
  customer_create->add_option("--username", username, "Username");
  customer_create->add_option("--name", full_name, "Full name");
  customer_create->add_option("--email", email, "Email address");
  customer_create->add_option("--phone", phone, "Phone number");
  customer_create->add_option("--address", address, "Postal address");
  auto* account_open = admin->add_subcommand("account-open", "Open a customer account");
  account_open->add_option("--customer", customer, "Customer id");
  account_open->add_option("--kind", kind, "CUSTOMER_CHECKING or CUSTOMER_SAVINGS");
  account_open->add_option("--deposit", deposit, "Opening deposit in minor units");
  auto* biller_add = admin->add_subcommand("biller-add", "Register a biller");
  biller_add->add_option("--name", name, "Biller name");
  auto* cheque_decide = admin->add_subcommand("cheque-decide", "Approve or reject a cheque book request");
  cheque_decide->add_option("request", request_id, "Request id");
  cheque_decide->add_option("--decision", decision, "APPROVED or REJECTED");
  auto* freeze = admin->add_subcommand("freeze", "Set an account status (default FROZEN)");
  freeze->add_option("account", account, "Account id");
  freeze->add_option("--status", status, "ACTIVE, FROZEN, or CLOSED");

  std::vector<std::string> argv_store{"bank"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  const fs::path session_path =
      inv.session_path.empty() ? default_session_path() : fs::path(inv.session_path);
  inv.session = load_session(session_path);
  const bool authenticated_command = !login->parsed() && !logout->parsed();
  if (authenticated_command && !inv.session) return inv.unauthenticated();

  auto missing = [&](std::initializer_list<std::pair<const char*, bool>> fields) -> std::optional<int> {
    for (const auto& [flag, present] : fields) {
      if (!present) return inv.usage(std::string("missing ") + flag);
    }
    return std::nullopt;
  };

  if (login->parsed()) {
    if (auto e = missing({{"--user", !user.empty()}})) return *e;
    auto pw = read_secret(in, err, "Password: ");
    if (!pw) return inv.usage("password expected on stdin");
    inv.session.reset();
    auto r = inv.call("POST", "/api/v1/session", json{{"username", user}, {"password", *pw}});
    if (r && r->status == 201) {
      json j = json::parse(r->body, nullptr, false);
      if (j.is_discarded() || !save_session(session_path, {inv.server_url(), j.value("token", "")})) {
        err << "cannot write session file " << session_path.string() << '\n';
        return kApiError;
      }
    }
    return inv.finish(r, [&](const json& j) {
      out << "logged in as " << user << " (" << j.value("principal_id", "") << ", "
          << j.value("role", "") << ")\n";
    });
  }
  if (logout->parsed()) {
    std::optional<ApiResult> r = ApiResult{200, R"({"status":"ok"})"};
    if (inv.session) r = inv.call("DELETE", "/api/v1/session", std::nullopt);
    std::error_code ec;
    fs::remove(session_path, ec);
    return inv.finish(r, [&](const json&) { out << "logged out\n"; });
  }
  if (accounts->parsed()) {
    return inv.finish(inv.call("GET", "/api/v1/accounts", std::nullopt), [&](const json& j) {
      for (const auto& a : j.at("accounts")) {
        out << a.value("account_id", "") << "  " << a.value("kind", "") << "  "
            << a.value("status", "") << "  " << format_minor(a.value("amount_minor", std::int64_t{0}))
            << '\n';
      }
    });
  }
  if (balance->parsed()) {
    if (auto e = missing({{"account", !account.empty()}})) return *e;
    return inv.finish(inv.call("GET", "/api/v1/accounts/" + url_encode(account) + "/balance", std::nullopt),
                      [&](const json& j) {
                        out << j.value("account_id", "") << ": "
                            << format_minor(j.value("amount_minor", std::int64_t{0})) << '\n';
                      });
  }
  if (statement->parsed()) {
    if (auto e = missing({{"account", !account.empty()}})) return *e;
    std::string query;
    auto add = [&](const char* k, const std::string& v) {
      query += (query.empty() ? "?" : "&") + std::string(k) + "=" + url_encode(v);
    };
    if (from_ts) add("from_ts", std::to_string(*from_ts));
    if (to_ts) add("to_ts", std::to_string(*to_ts));
    if (min_amount) add("min_amount", std::to_string(*min_amount));
    if (max_amount) add("max_amount", std::to_string(*max_amount));
    if (!cursor.empty()) add("cursor", cursor);
    if (limit) add("limit", std::to_string(*limit));
    return inv.finish(
        inv.call("GET", "/api/v1/accounts/" + url_encode(account) + "/transactions" + query, std::nullopt),
        [&](const json& j) {
          for (const auto& l : j.at("lines")) {
            out << l.value("tx_id", "") << "  " << l.value("timestamp", std::int64_t{0}) << "  "
                << l.value("kind", "") << "  " << format_minor(l.value("amount_minor", std::int64_t{0}))
                << "  balance " << format_minor(l.value("running_balance_minor", std::int64_t{0}))
                << "  " << l.value("memo", "") << '\n';
          }
          if (j.contains("next_cursor")) out << "more: --cursor " << j["next_cursor"].get<std::string>() << '\n';
        });
  }
  if (transfer->parsed()) {
    if (auto e = missing({{"--from", !from.empty()}, {"--to", !to.empty()}, {"--amount", amount.has_value()}})) {
      return *e;
    }
    json body = {{"from_account", from}, {"to_account", to}, {"amount_minor", *amount},
                 {"memo", memo}, {"idempotency_key", key.empty() ? random_key() : key}};
    return inv.finish(inv.call("POST", "/api/v1/transfers", body),
                      [&](const json& j) { print_receipt(out, j); });
  }
  if (paybill->parsed()) {
    if (auto e = missing({{"--from", !from.empty()}, {"--biller", !biller.empty()},
                          {"--ref", !ref.empty()}, {"--amount", amount.has_value()}})) {
      return *e;
    }
    json body = {{"from_account", from}, {"biller_id", biller}, {"reference", ref},
                 {"amount_minor", *amount}, {"idempotency_key", key.empty() ? random_key() : key}};
    return inv.finish(inv.call("POST", "/api/v1/payments/bill", body),
                      [&](const json& j) { print_receipt(out, j); });
  }
  if (billers->parsed()) {
    return inv.finish(inv.call("GET", "/api/v1/billers", std::nullopt), [&](const json& j) {
      for (const auto& b : j.at("billers")) {
        out << b.value("biller_id", "") << "  " << b.value("name", "") << '\n';
      }
    });
  }
  if (cheque_request->parsed()) {
    if (auto e = missing({{"--account", !account.empty()}, {"--leaves", leaves.has_value()}})) return *e;
    return inv.finish(
        inv.call("POST", "/api/v1/cheques/book-requests", json{{"account_id", account}, {"leaves", *leaves}}),
        [&](const json& j) {
          out << j.value("request_id", "") << ' ' << j.value("status", "") << " ("
              << j.value("leaves", 0) << " leaves)\n";
        });
  }
  if (cheque_stop->parsed()) {
    if (auto e = missing({{"--account", !account.empty()}, {"--number", !number.empty()}})) return *e;
    return inv.finish(inv.call("POST", "/api/v1/cheques/stop-orders",
                               json{{"account_id", account}, {"cheque_number", number}, {"reason", reason}}),
                      [&](const json& j) {
                        out << j.value("order_id", "") << ' ' << j.value("status", "") << " cheque "
                            << j.value("cheque_number", "") << '\n';
                      });
  }
  if (password->parsed()) {
    auto old_pw = read_secret(in, err, "Current password: ");
    auto new_pw = old_pw ? read_secret(in, err, "New password: ") : std::nullopt;
    if (!new_pw) return inv.usage("current and new password expected on stdin");
    return inv.finish(inv.call("POST", "/api/v1/profile/password",
                               json{{"old_password", *old_pw}, {"new_password", *new_pw}}),
                      [&](const json&) { out << "password changed\n"; });
  }
  if (contact->parsed()) {
    json body = json::object();
    if (email_opt->count()) body["email"] = email;
    if (phone_opt->count()) body["phone"] = phone;
    if (address_opt->count()) body["postal_address"] = address;
    return inv.finish(inv.call("PUT", "/api/v1/profile/contact", body), [&](const json& j) {
      out << j.value("customer_id", "") << ": " << j.value("email", "") << ", "
          << j.value("phone", "") << ", " << j.value("postal_address", "") << '\n';
    });
  }
  if (customer_create->parsed()) {
    if (auto e = missing({{"--username", !username.empty()}, {"--name", !full_name.empty()}})) return *e;
    auto pw = read_secret(in, err, "Initial password: ");
    if (!pw) return inv.usage("initial password expected on stdin");
    json body = {{"username", username}, {"full_name", full_name}, {"email", email},
                 {"phone", phone}, {"postal_address", address}, {"initial_password", *pw}};
    return inv.finish(inv.call("POST", "/api/v1/admin/customers", body), [&](const json& j) {
      out << "created " << j.value("customer_id", "") << " (" << j.value("username", "") << ")\n";
    });
  }
  if (account_open->parsed()) {
    if (auto e = missing({{"--customer", !customer.empty()}})) return *e;
    json body = {{"customer_id", customer}, {"kind", kind}, {"opening_deposit_minor", deposit.value_or(0)}};
    return inv.finish(inv.call("POST", "/api/v1/admin/accounts", body), [&](const json& j) {
      out << "opened " << j.value("account_id", "") << " for " << j.value("owner", "") << ", balance "
          << format_minor(j.value("amount_minor", std::int64_t{0})) << '\n';
    });
  }
  if (biller_add->parsed()) {
    if (auto e = missing({{"--name", !name.empty()}})) return *e;
    return inv.finish(inv.call("POST", "/api/v1/admin/billers", json{{"name", name}}), [&](const json& j) {
      out << "registered " << j.value("biller_id", "") << " " << j.value("name", "") << '\n';
    });
  }
  if (cheque_decide->parsed()) {
    if (auto e = missing({{"request", !request_id.empty()}, {"--decision", !decision.empty()}})) return *e;
    return inv.finish(inv.call("POST", "/api/v1/admin/cheques/book-requests/" + url_encode(request_id) + "/decision",
                               json{{"decision", decision}}),
                      [&](const json& j) {
                        out << j.value("request_id", "") << ' ' << j.value("status", "") << '\n';
                      });
  }
  if (freeze->parsed()) {
    if (auto e = missing({{"account", !account.empty()}})) return *e;
    return inv.finish(inv.call("POST", "/api/v1/admin/accounts/" + url_encode(account) + "/status",
                               json{{"status", status}}),
                      [&](const json& j) {
                        out << j.value("account_id", "") << ' ' << j.value("status", "") << '\n';
                      });
  }
  return inv.usage("no command");
}

}  // namespace bank::cli
