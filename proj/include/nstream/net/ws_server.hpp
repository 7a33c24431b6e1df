#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "nstream/runtime/scheduler.hpp"
#include "nstream/runtime/transport.hpp"

namespace nstream {

class Broker;

/// Websocket and HTTP front end for the broker (and optionally the SFU).
///
///   /ws       broker line protocol, one text frame per line
///   /sfu      SFU line protocol, when an SFU service is given
///   /healthz  liveness
///   /streams  registry snapshot, when debug endpoints are enabled
///
/// Network I/O runs on an internal thread; every broker callback is posted
/// to `loop`, which the caller runs.
class WsServer {
 public:
  struct Options {
    std::string address = "127.0.0.1";
    std::uint16_t port = 8080;
    std::string token;
    bool debug_endpoints = false;
    std::size_t outbox_limit = 1024;
  };

  WsServer(Options options, Scheduler& loop, Broker& broker, LineService* sfu = nullptr);
  ~WsServer();
  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  /// Binds and starts serving; returns the bound port (useful with port 0).
  std::uint16_t start();
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Client transports over real websockets, for talking to a live broker.
/// Handlers are posted to `loop`. Only ws:// origins are supported.
class WsClientContext {
 public:
  explicit WsClientContext(Scheduler& loop);
  ~WsClientContext();
  WsClientContext(const WsClientContext&) = delete;
  WsClientContext& operator=(const WsClientContext&) = delete;

  TransportFactory factory();

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace nstream
