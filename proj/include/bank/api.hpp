#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bank/error.hpp"
#include "bank/services.hpp"

namespace bank::api {

using persistence::json;

struct Request {
  std::string method;
  std::string path;
  std::multimap<std::string, std::string> query;
  std::string authorization;  // raw header value
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;

  friend bool operator==(const Response&, const Response&) = default;
};

// Wire renderings of service results. The router's bodies are exactly these
// documents serialized, so a direct service call can be compared with HTTP.
json render(const services::Receipt& r);
json render(const services::StatementPage& page);
json render(const services::CustomerProfile& p);
json render(const services::ChequeBookRequest& r);
json render(const services::StopChequeOrder& o);
json render_account(const ledger::Account& a);
json render_public(const services::Biller& b);
json render_admin(const services::Biller& b);
json render(const auth::Session& s);
json render_balance(std::string_view account, ledger::Money amount);

Response error_response(ErrorCode code, std::string_view message);
Response json_response(int status, const json& body);

// Maps HTTP requests onto Bank operations. Thread-safe; holds no state of its
// own beyond the route table.
class Router {
 public:
  explicit Router(services::Bank& bank);
  ~Router();

  Response handle(const Request& request) const;

 private:
  struct Route;
  services::Bank& bank_;
  std::vector<Route> routes_;
};

struct ServerConfig {
  int listen_port = 8475;
  std::string bind_address = "127.0.0.1";
  std::filesystem::path data_dir = "./bank-data";
  std::int64_t session_idle_ttl_s = 900;
  int lockout_threshold = 5;
  std::int64_t lockout_window_s = 900;
  std::uint64_t snapshot_every = 1000;
  std::string currency_code = "USD";
  std::string hash_params = "pbkdf2-sha256-600k";
};

// `key = value` lines; `#` starts a comment. Unknown keys and non-positive
// numbers raise BankError(VALIDATION).
ServerConfig parse_config(std::string_view text);
// Applies one `key=value` setting on top of `config` (used for overrides).
void apply_setting(ServerConfig& config, std::string_view key, std::string_view value);

services::BankOptions bank_options(const ServerConfig& config);

// HTTP front end for a Router.
class Server {
 public:
  explicit Server(services::Bank& bank);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Port 0 picks an ephemeral port. Returns false when the bind fails.
  bool bind(const std::string& host, int port);
  int port() const;

  void run();    // blocks until stop()
  void start();  // runs on a background thread
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bank::api
