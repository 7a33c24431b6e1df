#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "nstream/runtime/scheduler.hpp"
#include "nstream/runtime/transport.hpp"

namespace nstream {

/// In-process line network with seeded per-message latency.
///
/// Hosts are services registered by name; clients reach them through
/// origins such as "sim://broker" or "wss://example.com" (only the host part
/// matters). Each direction of a connection is FIFO.
class SimNetwork {
 public:
  struct Options {
    Millis min_latency{1};
    Millis max_latency{20};
  };

  SimNetwork(Scheduler& sched, std::uint64_t seed);
  SimNetwork(Scheduler& sched, std::uint64_t seed, Options options);
  ~SimNetwork();

  void listen(const std::string& host, LineService& service);
  /// Closes every connection to `host` and refuses new ones until listen().
  void shutdown(const std::string& host);

  /// Factory whose connections carry `tag`, so faults can target one actor.
  TransportFactory factory(std::string tag = {});
  /// Severs every open connection created with `tag`; returns the count.
  std::size_t drop(const std::string& tag);

  std::size_t open_connections() const;
  Millis sample_latency();

  struct Conn;

 private:
  friend class SimClientTransport;
  friend class SimServerPeer;

  void deliver_to_server(const std::shared_ptr<Conn>& c, std::string line);
  void deliver_to_client(const std::shared_ptr<Conn>& c, std::string line);
  void sever(const std::shared_ptr<Conn>& c, const std::string& reason, bool notify_client, bool notify_server);
  Millis fifo_time(Millis& last);
  bool serving(const Conn& c) const;

  struct Host {
    LineService* service;
    std::uint64_t generation;
  };

  Scheduler& sched_;
  Options options_;
  std::mt19937_64 rng_;
  std::map<std::string, Host> hosts_;
  std::uint64_t generation_ = 0;
  std::vector<std::weak_ptr<Conn>> conns_;
};

/// Host part of an origin/locator: "ws://h:1/x" -> "h:1".
std::string origin_host(const std::string& origin);

}  // namespace nstream
