#include "surrobench/serve.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

namespace surrobench {

namespace {

constexpr std::size_t kMaxLine = 1 << 20;

nlohmann::json error_response(const nlohmann::json& id, std::string_view code, const std::string& message) {
  return {{"id", id}, {"error", {{"code", code}, {"message", message}}}};
}

Configuration parse_request_config(const ConfigurationSpace& space, const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  return space.from_json(j);
}

bool write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

/// Reads one '\n'-terminated line into `line`; false on EOF or error.
bool recv_line(int fd, std::string& buffer, std::string& line) {
  while (true) {
    const auto pos = buffer.find('\n');
    if (pos != std::string::npos) {
      line.assign(buffer, 0, pos);
      buffer.erase(0, pos + 1);
      return true;
    }
    if (buffer.size() > kMaxLine) {
      line = std::move(buffer);
      buffer.clear();
      return true;
    }
    char chunk[65536];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      if (buffer.empty()) return false;
      line = std::move(buffer);
      buffer.clear();
      return true;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace

std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string_view::npos) throw Error("endpoint must be host:port, got '" + std::string(endpoint) + "'");
  const auto port = parse_int(endpoint.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) throw Error("bad port in '" + std::string(endpoint) + "'");
  std::string host(endpoint.substr(0, colon));
  if (host.empty()) host = "127.0.0.1";
  return {host, static_cast<std::uint16_t>(*port)};
}

Server::Server(std::shared_ptr<const SurrogateBenchmark> model) : model_(std::move(model)) {}

Server::~Server() { close_listener(); }

void Server::record_latency(double seconds) {
  std::lock_guard lock(mutex_);
  ++count_;
  sum_ += seconds;
  sum_sq_ += seconds * seconds;
}

LatencyStats Server::latency() const {
  std::lock_guard lock(mutex_);
  LatencyStats s;
  s.count = count_;
  if (count_ == 0) return s;
  const double n = static_cast<double>(count_);
  s.mean_seconds = sum_ / n;
  s.stddev_seconds = std::sqrt(std::max(0.0, sum_sq_ / n - s.mean_seconds * s.mean_seconds));
  return s;
}

std::string Server::handle_line(std::string_view line) {
  const auto start = std::chrono::steady_clock::now();
  nlohmann::json id = nullptr;
  nlohmann::json response;
  try {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      return error_response(id, "bad_request", "request is not valid JSON").dump();
    }
    if (!req.is_object()) return error_response(id, "bad_request", "request must be a JSON object").dump();
    if (req.contains("id")) id = req["id"];
    if (!req.contains("op") || !req["op"].is_string()) {
      return error_response(id, "bad_request", "missing string field 'op'").dump();
    }
    const std::string op = req["op"].get<std::string>();
    if (op == "info") {
      response = {{"id", id}, {"info", model_->info()}};
    } else if (op == "shutdown") {
      request_shutdown();
      response = {{"id", id}, {"ok", true}};
    } else if (op == "run") {
      if (!req.contains("config") || !req.contains("instance") || !req["instance"].is_string() ||
          !req.contains("seed") || !req["seed"].is_number_integer()) {
        return error_response(id, "bad_request", "run needs 'config', string 'instance' and integer 'seed'").dump();
      }
      Configuration config;
      try {
        config = parse_request_config(model_->space(), req["config"]);
      } catch (const std::exception& e) {
        return error_response(id, "bad_request", e.what()).dump();
      }
      const auto r = model_->predict_run(config, req["instance"].get<std::string>(), req["seed"].get<std::int64_t>());
      response = {{"id", id},
                  {"status", r.status == RunStatus::timeout ? "TIMEOUT" : "SUCCESS"},
                  {"cost", r.cost},
                  {"quantile", r.quantile}};
      record_latency(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    } else {
      return error_response(id, "bad_request", "unknown op '" + op + "'").dump();
    }
  } catch (const DataError& e) {
    return error_response(id, "bad_request", e.what()).dump();
  } catch (const std::exception& e) {
    return error_response(id, "internal", e.what()).dump();
  }
  return response.dump();
}

void Server::serve_stream(std::istream& in, std::ostream& out) {
  std::string line;
  while (!shutting_down() && std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out << handle_line(line) << '\n';
    out.flush();
  }
}

void Server::request_shutdown() {
  if (shutdown_.exchange(true)) return;
  std::lock_guard lock(mutex_);
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  // Stop reading new requests; each connection finishes the one it is answering.
  for (int fd : connections_) ::shutdown(fd, SHUT_RD);
}

void Server::close_listener() {
  std::lock_guard lock(mutex_);
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void Server::serve_tcp(const std::string& host, std::uint16_t port,
                       const std::function<void(std::uint16_t)>& on_listening) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw Error("cannot resolve '" + host + "'");
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw Error(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 128) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw Error("cannot listen on " + host + ":" + std::to_string(port) + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  {
    std::lock_guard lock(mutex_);
    listen_fd_ = fd;
  }
  if (shutting_down()) ::shutdown(fd, SHUT_RDWR);
  if (on_listening) on_listening(ntohs(bound.sin_port));

  std::vector<std::thread> workers;
  while (!shutting_down()) {
    const int conn = ::accept(fd, nullptr, nullptr);
    if (conn < 0) {
      if (errno == EINTR) continue;
      break;
    }
    ::setsockopt(conn, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    {
      std::lock_guard lock(mutex_);
      if (shutdown_) {
        ::close(conn);
        break;
      }
      connections_.push_back(conn);
    }
    workers.emplace_back([this, conn] {
      std::string buffer, line;
      while (recv_line(conn, buffer, line)) {
        if (trim(line).empty()) continue;
        std::string reply = handle_line(line);
        reply.push_back('\n');
        if (!write_all(conn, reply)) break;
      }
      std::lock_guard lock(mutex_);
      connections_.erase(std::find(connections_.begin(), connections_.end(), conn));
      ::close(conn);
    });
  }
  for (auto& w : workers) w.join();
  close_listener();
}

// ---------------------------------------------------------------------------
// Client

Client::Client(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw Error("cannot resolve '" + host + "'");
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    if (fd_ >= 0) ::close(fd_);
    throw Error("cannot connect to " + host + ":" + std::to_string(port) + ": " + why);
  }
  ::freeaddrinfo(res);
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

void Client::send_line(const std::string& line) {
  if (!write_all(fd_, line + "\n")) throw Error("connection lost while sending");
}

std::string Client::read_line() {
  std::string line;
  if (!recv_line(fd_, buffer_, line)) throw Error("connection closed by server");
  return line;
}

nlohmann::json Client::call(const nlohmann::json& request) {
  send_line(request.dump());
  return nlohmann::json::parse(read_line());
}

std::vector<nlohmann::json> Client::call_batch(const std::vector<nlohmann::json>& requests) {
  std::string all;
  for (const auto& r : requests) {
    all += r.dump();
    all.push_back('\n');
  }
  // A writer thread keeps large batches from deadlocking on full socket buffers.
  std::thread writer([&] { write_all(fd_, all); });
  std::vector<nlohmann::json> out;
  out.reserve(requests.size());
  try {
    for (std::size_t i = 0; i < requests.size(); ++i) out.push_back(nlohmann::json::parse(read_line()));
  } catch (...) {
    writer.join();
    throw;
  }
  writer.join();
  return out;
}

}  // namespace surrobench
