#include <httplib.h>

#include <thread>

#include "bank/api.hpp"

namespace bank::api {

struct Server::Impl {
  explicit Impl(services::Bank& bank) : router(bank) {}

  Router router;
  httplib::Server http;
  int port = -1;
  std::thread thread;
};

namespace {

void forward(const Router& router, const httplib::Request& req, httplib::Response& res) {
  Request r;
  r.method = req.method;
  r.path = req.path;
  for (const auto& [k, v] : req.params) r.query.emplace(k, v);
  r.authorization = req.get_header_value("Authorization");
  r.body = req.body;
  Response out = router.handle(r);
  res.status = out.status;
  res.set_content(out.body, "application/json");
}

}  // namespace

Server::Server(services::Bank& bank) : impl_(std::make_unique<Impl>(bank)) {
  auto& http = impl_->http;
  http.new_task_queue = [] { return new httplib::ThreadPool(32); };
  // httplib's default also sets SO_REUSEPORT, which would let a second server
  // share an occupied port.
  http.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    forward(impl_->router, req, res);
  };
  http.Get(".*", handler);
  http.Post(".*", handler);
  http.Put(".*", handler);
  http.Delete(".*", handler);
  http.Patch(".*", handler);
  http.Options(".*", handler);
}

Server::~Server() { stop(); }

bool Server::bind(const std::string& host, int port) {
  if (port == 0) {
    impl_->port = impl_->http.bind_to_any_port(host);
    return impl_->port > 0;
  }
  if (!impl_->http.bind_to_port(host, port)) return false;
  impl_->port = port;
  return true;
}

int Server::port() const { return impl_->port; }

void Server::run() { impl_->http.listen_after_bind(); }

void Server::start() {
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
}

void Server::stop() {
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace bank::api
