#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace nstream {

/// Server-side handle for one client connection carrying text lines.
class LinePeer {
 public:
  virtual ~LinePeer() = default;
  virtual void send(std::string line) = 0;
  virtual void close() = 0;
};

/// A service that accepts line connections (broker, SFU). All callbacks are
/// invoked from the service's ordering domain.
class LineService {
 public:
  virtual ~LineService() = default;
  virtual void on_open(const std::shared_ptr<LinePeer>& peer) = 0;
  virtual void on_line(const std::shared_ptr<LinePeer>& peer, std::string_view line) = 0;
  virtual void on_close(const std::shared_ptr<LinePeer>& peer) = 0;
};

/// Client end of an ordered, reliable line connection.
///
/// on_close fires once for failures (including a failed open) but not after
/// an explicit close().
class ClientTransport {
 public:
  struct Handlers {
    std::function<void()> on_open;
    std::function<void(std::string line)> on_line;
    std::function<void(std::string reason)> on_close;
  };

  virtual ~ClientTransport() = default;
  virtual void open(Handlers handlers) = 0;
  virtual void send(std::string line) = 0;
  virtual void close() = 0;
};

/// Builds a transport to `origin` (e.g. "sim://broker", "ws://127.0.0.1:8080")
/// at resource `path` ("/ws", "/sfu").
using TransportFactory =
    std::function<std::unique_ptr<ClientTransport>(const std::string& origin, const std::string& path)>;

}  // namespace nstream
