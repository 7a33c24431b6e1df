#pragma once

#include <map>
#include <memory>
#include <string>

#include "nstream/core/stream_record.hpp"
#include "nstream/engine/connector.hpp"
#include "nstream/engine/session.hpp"
#include "nstream/protocol/envelope.hpp"
#include "nstream/runtime/transport.hpp"

namespace nstream {

/// Simulated selective forwarding unit with one room per named stream.
///
/// Every endpoint keeps one connection (one link) to the SFU. Frames sent
/// by a room's publisher are forwarded unchanged to its subscribers, sealed
/// bytes included; the SFU never looks inside a payload.
class SfuService final : public LineService {
 public:
  explicit SfuService(Scheduler& sched) : sched_(sched) {}

  void on_open(const std::shared_ptr<LinePeer>& peer) override;
  void on_line(const std::shared_ptr<LinePeer>& peer, std::string_view line) override;
  void on_close(const std::shared_ptr<LinePeer>& peer) override;

  const StreamRegistry& rooms() const noexcept { return rooms_; }
  std::size_t endpoint_links() const;
  std::uint64_t frames_in() const noexcept { return frames_in_; }
  std::uint64_t frames_forwarded() const noexcept { return frames_forwarded_; }

 private:
  struct Endpoint {
    std::shared_ptr<LinePeer> peer;
    EndpointId ep;
    SeqCounter seq;
    bool link_up = false;
    std::map<StreamName, StreamRef> refs;
  };

  void handle(Endpoint& e, const SignalEnvelope& env);
  void forward_frame(Endpoint& e, std::string_view line);
  void send(const EndpointId& to, std::optional<StreamName> stream, MessageKind kind, std::string payload,
            const EndpointId& from);
  void send_error(Endpoint& e, const std::optional<StreamRef>& stream, const Error& err);
  void leave(Endpoint& e, const StreamName& name);

  Scheduler& sched_;
  StreamRegistry rooms_;
  std::map<const LinePeer*, Endpoint> endpoints_;
  std::map<EndpointId, const LinePeer*> by_id_;
  std::uint64_t next_id_ = 1;
  std::uint64_t frames_in_ = 0;
  std::uint64_t frames_forwarded_ = 0;
  EndpointId self_{"sfu"};
};

/// Endpoint side of the SFU: one shared connection per connector
/// (per endpoint), negotiated once, carrying every session's stream.
class SfuConnector final : public Connector {
 public:
  SfuConnector(TransportFactory factory, std::string endpoint_label, std::string origin = {});
  ~SfuConnector() override;

  std::string_view scheme() const override { return "sfu"; }
  void publish(EndpointSession& session) override;
  void subscribe(EndpointSession& session) override;
  void stop(EndpointSession& session) override;
  void add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) override;
  void remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) override;
  void relay(EndpointSession& session, const PeerLink& link, MessageKind kind, std::string payload) override;

  const std::string& link_id() const noexcept { return link_id_; }
  bool link_up() const noexcept { return link_up_; }

 private:
  friend class SfuPort;
  struct Member {
    EndpointSession* session;
    Role role;
    bool joined = false;
  };

  void ensure_connected(EndpointSession& session);
  void on_line(const std::string& line);
  void on_lost(const std::string& reason);
  void join(EndpointSession& session, Member& m);
  void send(const std::optional<StreamRef>& stream, MessageKind kind, std::string payload);
  void send_raw(std::string line);
  EndpointSession* session_for(const std::string& stream_text);

  TransportFactory factory_;
  std::string link_id_;
  std::string origin_;
  std::unique_ptr<ClientTransport> transport_;
  std::optional<EndpointId> ep_;
  bool link_up_ = false;
  SeqCounter seq_;
  std::map<const EndpointSession*, Member> members_;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

}  // namespace nstream
