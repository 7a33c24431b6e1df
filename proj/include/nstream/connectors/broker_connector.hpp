#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nstream/engine/connector.hpp"
#include "nstream/engine/session.hpp"
#include "nstream/protocol/envelope.hpp"
#include "nstream/runtime/transport.hpp"

namespace nstream {

/// Named stream on the notification broker. Each attached session holds
/// its own line connection; the broker relays envelopes and media flows
/// peer to peer (full mesh).
///
/// On an unexpected disconnect the connector retries three times with
/// 0.5 s, 1 s and 2 s backoff and re-joins; after that the session gets a
/// transport error.
class BrokerConnector final : public Connector {
 public:
  static constexpr int kReconnectAttempts = 3;
  static constexpr Millis kFirstBackoff{500};

  /// `origin` overrides the session address origin when non-empty (used
  /// when one session publishes to several services).
  explicit BrokerConnector(TransportFactory factory, std::string origin = {}, std::string token = {});
  ~BrokerConnector() override;

  std::string_view scheme() const override { return "rtclite"; }
  void publish(EndpointSession& session) override;
  void subscribe(EndpointSession& session) override;
  void stop(EndpointSession& session) override;
  void add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) override;
  void remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) override;
  void relay(EndpointSession& session, const PeerLink& link, MessageKind kind, std::string payload) override;

  /// Broker-assigned id of the session's current connection.
  std::optional<EndpointId> endpoint_of(const EndpointSession& session) const;
  std::size_t reconnects() const noexcept { return reconnects_; }

 private:
  struct Attachment;

  void join(EndpointSession& session, Role role);
  void connect(const std::shared_ptr<Attachment>& a);
  void on_line(const std::shared_ptr<Attachment>& a, const std::string& line);
  void on_lost(const std::shared_ptr<Attachment>& a, const std::string& reason);
  void send(const std::shared_ptr<Attachment>& a, MessageKind kind, std::string payload,
            const std::optional<EndpointId>& to = std::nullopt, bool session_scope = false);

  TransportFactory factory_;
  std::string origin_;
  std::string token_;
  std::map<const EndpointSession*, std::shared_ptr<Attachment>> attached_;
  std::size_t reconnects_ = 0;
};

}  // namespace nstream
