#pragma once

#include <atomic>
#include <string>
#include <thread>
#include <vector>

namespace coforge::runtime {

struct EdgeConfig {
  std::string bind_host = "0.0.0.0";
  int port = 7077;  // 0 picks an ephemeral port
  double throttle_bps = 0;  // sender token bucket; 0 = unthrottled
  bool log_errors = true;
};

/// TCP co-inference edge endpoint. Each accepted session gets its own
/// receiver / compute / sender workers joined at session end.
class EdgeServer {
 public:
  explicit EdgeServer(EdgeConfig cfg);
  ~EdgeServer();

  EdgeServer(const EdgeServer&) = delete;
  EdgeServer& operator=(const EdgeServer&) = delete;

  /// Binds and starts accepting in a background thread. Throws ConfigError
  /// if the port is taken.
  void start();
  void stop();
  /// Accept loop on the calling thread; returns on stop().
  void serve_forever();

  int port() const { return port_; }

 private:
  void accept_loop();
  void handle_session(int fd);

  EdgeConfig cfg_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::vector<std::thread> sessions_;
};

}  // namespace coforge::runtime
