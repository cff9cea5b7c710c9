#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "evac/server/protocol.hpp"
#include "evac/server/store.hpp"

namespace evac::server {

struct ServerOptions {
  std::string bind_address{"127.0.0.1"};
  std::uint16_t port{8080};  ///< 0 picks an ephemeral port
  std::filesystem::path data_dir{"evac-data"};
  std::optional<std::filesystem::path> web_dir;  ///< static files served under /
  std::chrono::milliseconds tick_period{100};
  HostConfig host;
};

/// HTTP and WebSocket front end. REST under /api, game protocol on /ws.
class Server {
 public:
  Server(ScenarioCatalog catalog, ServerOptions options, HostEnvironment env = HostEnvironment::system());
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the listening socket; throws std::system_error on failure.
  void listen();
  std::uint16_t port() const;

  /// Serves on the calling thread until stop().
  void run();
  /// Serves on a background thread.
  void start();
  void stop();

  SessionStore& store();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace evac::server
