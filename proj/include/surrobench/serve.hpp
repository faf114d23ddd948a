#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surrobench/surrogate.hpp"

namespace surrobench {

struct LatencyStats {
  std::size_t count = 0;
  double mean_seconds = 0.0;
  double stddev_seconds = 0.0;
};

/// Newline-delimited JSON front end for a surrogate model.
///   {"id": 1, "op": "run", "config": {...}, "instance": "i1", "seed": 7}
///   {"id": 2, "op": "info"}
///   {"id": 3, "op": "shutdown"}
class Server {
 public:
  explicit Server(std::shared_ptr<const SurrogateBenchmark> model);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Answers one request line. Never throws; errors become error objects.
  std::string handle_line(std::string_view line);

  /// Serves until end of input or a shutdown request.
  void serve_stream(std::istream& in, std::ostream& out);
  /// Listens on host:port (port 0 picks a free port) and serves each connection
  /// on its own thread until shutdown; in-flight requests are answered first.
  void serve_tcp(const std::string& host, std::uint16_t port,
                 const std::function<void(std::uint16_t)>& on_listening = {});
  void request_shutdown();
  bool shutting_down() const { return shutdown_.load(); }

  LatencyStats latency() const;

 private:
  void record_latency(double seconds);
  void close_listener();

  std::shared_ptr<const SurrogateBenchmark> model_;
  std::atomic<bool> shutdown_{false};
  mutable std::mutex mutex_;
  int listen_fd_ = -1;
  std::vector<int> connections_;
  std::size_t count_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

/// Blocking TCP client for the wire protocol.
class Client {
 public:
  Client(const std::string& host, std::uint16_t port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  nlohmann::json call(const nlohmann::json& request);
  /// Sends every request before reading the responses (pipelining).
  std::vector<nlohmann::json> call_batch(const std::vector<nlohmann::json>& requests);

 private:
  void send_line(const std::string& line);
  std::string read_line();

  int fd_ = -1;
  std::string buffer_;
};

/// Splits "host:port".
std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view endpoint);

}  // namespace surrobench
