// bankd: recovers the data directory and serves the HTTP API.

#include <unistd.h>

#include <pthread.h>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bank/api.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Internet banking API server", "bankd"};
  std::string config_path;
  std::optional<int> port;
  std::string data_dir, bind_address, hash_params, admin_user;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "Config file (env BANK_CONFIG)");
  app.add_option("--listen-port", port, "Port; 0 picks a free one");
  app.add_option("--data-dir", data_dir, "Data directory");
  app.add_option("--bind-address", bind_address, "Listen address");
  app.add_option("--set", overrides, "Extra key=value config overrides");
  app.add_option("--admin-user", admin_user,
                 "Create this administrator if missing; password from BANK_ADMIN_PASSWORD or stdin");
  CLI11_PARSE(app, argc, argv);

  bank::api::ServerConfig config;
  try {
    if (config_path.empty()) {
      if (const char* env = std::getenv("BANK_CONFIG"); env && *env) config_path = env;
    }
    if (!config_path.empty()) config = bank::api::parse_config(slurp(config_path));
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got " + o);
      bank::api::apply_setting(config, o.substr(0, eq), o.substr(eq + 1));
    }
    if (!data_dir.empty()) config.data_dir = data_dir;
    if (!bind_address.empty()) config.bind_address = bind_address;
  } catch (const std::exception& e) {
    std::cerr << "bankd: " << e.what() << '\n';
    return 2;
  }

  std::unique_ptr<bank::services::Bank> bank;
  try {
    bank = bank::services::Bank::open(bank::api::bank_options(config));
    if (!admin_user.empty()) {
      std::string password;
      if (const char* env = std::getenv("BANK_ADMIN_PASSWORD"); env && *env) {
        password = env;
      } else if (!std::getline(std::cin, password)) {
        std::cerr << "bankd: admin password expected in BANK_ADMIN_PASSWORD or on stdin\n";
        return 2;
      }
      const auto id = bank->bootstrap_admin(admin_user, password);
      std::cerr << "bankd: administrator " << admin_user << " is " << id << '\n';
    }
  } catch (const bank::CorruptRecordError& e) {
    std::cerr << "bankd: journal corrupt at seq " << e.seq() << ": " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "bankd: startup failed: " << e.what() << '\n';
    return 1;
  }

  // Signals are taken synchronously below; worker threads inherit the mask.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  bank::api::Server server(*bank);
  const int listen_port = port.value_or(config.listen_port);
  if (!server.bind(config.bind_address, listen_port)) {
    std::cerr << "bankd: cannot bind " << config.bind_address << ':' << listen_port << '\n';
    return 1;
  }
  server.start();
  std::cout << "bankd listening on " << config.bind_address << ':' << server.port() << " (last_seq "
            << bank->last_seq() << ")" << std::endl;
  int sig = 0;
  sigwait(&stop_signals, &sig);
  server.stop();
  std::cerr << "bankd: stopped on signal " << sig << '\n';
  return 0;
}
