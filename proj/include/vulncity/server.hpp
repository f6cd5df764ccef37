#pragma once

#include "vulncity/collab.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>

namespace vulncity::net {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::string sceneText;       // served verbatim at /scene.json
  std::string sceneHash;
  std::set<std::string> overlayKeys;
  std::filesystem::path assetsDir;  // static viewer files; empty disables
  collab::HubConfig hub;
};

/// HTTP + WebSocket front end for a SessionHub. The session protocol lives at
/// "/ws"; "/scene.json" and "/scene.hash" serve the scene; other paths map into
/// assetsDir. Single-threaded: all hub calls happen on the thread inside run().
class CollabServer {
 public:
  explicit CollabServer(ServerOptions options);
  ~CollabServer();
  CollabServer(const CollabServer&) = delete;
  CollabServer& operator=(const CollabServer&) = delete;

  /// Binds and listens. Throws boost::system::system_error (e.g. address in use).
  void listen();
  unsigned short port() const;
  /// Serves until stop() is called.
  void run();
  /// Safe to call from any thread.
  void stop();

  std::function<void(const std::string&)> log;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace vulncity::net
