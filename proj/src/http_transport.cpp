#include <atomic>
#include <thread>

#include <httplib.h>

#include "kapps/middleware.hpp"

namespace kapps::mw {

struct HttpTransport::Server {
  httplib::Server http;
  std::thread worker;
  int port = 0;
};

HttpTransport::HttpTransport() = default;

HttpTransport::~HttpTransport() {
  std::lock_guard lock(mu_);
  for (auto& [addr, s] : servers_) {
    s->http.stop();
    if (s->worker.joinable()) s->worker.join();
  }
}

std::string HttpTransport::bind(const std::string& node_id, Endpoint endpoint) {
  auto server = std::make_unique<Server>();
  std::string path = "/kapps/" + node_id;
  server->http.Post(path, [endpoint](const httplib::Request& req, httplib::Response& res) {
    InvocationResult out;
    try {
      out = endpoint(decode_request(req.body));
    } catch (const std::exception& e) {
      out = InvocationResult::failure(FaultKind::ArgumentMismatch, std::string("bad request: ") + e.what());
    }
    res.set_content(encode_result(out), "application/json");
  });
  server->port = server->http.bind_to_any_port("127.0.0.1");
  if (server->port <= 0) throw std::runtime_error("cannot bind HTTP endpoint for " + node_id);
  Server* raw = server.get();
  server->worker = std::thread([raw] { raw->http.listen_after_bind(); });
  server->http.wait_until_ready();
  std::string address = "http://127.0.0.1:" + std::to_string(server->port) + path;
  std::lock_guard lock(mu_);
  servers_[address] = std::move(server);
  return address;
}

void HttpTransport::unbind(const std::string& address) {
  std::unique_ptr<Server> s;
  {
    std::lock_guard lock(mu_);
    auto it = servers_.find(address);
    if (it == servers_.end()) return;
    s = std::move(it->second);
    servers_.erase(it);
  }
  s->http.stop();
  if (s->worker.joinable()) s->worker.join();
}

InvocationResult HttpTransport::send(const std::string& address, const InvocationRequest& req) {
  const std::string prefix = "http://";
  if (address.rfind(prefix, 0) != 0)
    return InvocationResult::failure(FaultKind::TransportUnreachable, "not an http address: " + address);
  auto slash = address.find('/', prefix.size());
  std::string host_port = address.substr(prefix.size(), slash - prefix.size());
  std::string path = slash == std::string::npos ? "/" : address.substr(slash);
  httplib::Client client("http://" + host_port);
  client.set_connection_timeout(2, 0);
  client.set_read_timeout(10, 0);
  auto res = client.Post(path, encode_request(req), "application/json");
  if (!res) return InvocationResult::failure(FaultKind::TransportUnreachable, "no response from " + address);
  if (res->status != 200)
    return InvocationResult::failure(FaultKind::TransportUnreachable,
                                     "HTTP " + std::to_string(res->status) + " from " + address);
  try {
    return decode_result(res->body);
  } catch (const std::exception& e) {
    return InvocationResult::failure(FaultKind::TransportUnreachable, std::string("bad response: ") + e.what());
  }
}

}  // namespace kapps::mw
