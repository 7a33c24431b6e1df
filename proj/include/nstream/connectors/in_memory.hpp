#pragma once

#include <map>
#include <memory>

#include "nstream/core/stream_record.hpp"
#include "nstream/engine/connector.hpp"
#include "nstream/engine/session.hpp"

namespace nstream {

class InMemoryConnector;

/// Shared in-process stream registry. Every notification is posted to the
/// scheduler, so callers see the same asynchrony as with a remote service.
class InMemoryHub {
 public:
  explicit InMemoryHub(Scheduler& sched) : sched_(sched) {}

  const StreamRegistry& registry() const noexcept { return registry_; }

 private:
  friend class InMemoryConnector;

  struct Member {
    EndpointSession* session;
    InMemoryConnector* connector;
    StreamName stream;
    Role role;
  };

  void join(EndpointSession& session, InMemoryConnector& conn, Role role);
  void leave(EndpointSession& session);
  void relay(EndpointSession& session, const PeerLink& link, std::string payload);
  void tracks_changed(EndpointSession& session, const std::vector<TrackDescriptor>* added,
                      const std::vector<std::string>* removed);

  const EndpointId* id_of(const EndpointSession& session) const;
  /// Runs fn later if `ep` is still attached by then.
  void post_to(const EndpointId& ep, std::function<void(Member&)> fn);

  Scheduler& sched_;
  StreamRegistry registry_;
  std::map<EndpointId, Member> members_;
  std::map<const EndpointSession*, EndpointId> ids_;
  std::uint64_t next_id_ = 1;
};

/// The base named stream for single-process use.
class InMemoryConnector final : public Connector {
 public:
  explicit InMemoryConnector(InMemoryHub& hub) : hub_(hub) {}

  std::string_view scheme() const override { return "mem"; }
  void publish(EndpointSession& session) override { hub_.join(session, *this, Role::publisher); }
  void subscribe(EndpointSession& session) override { hub_.join(session, *this, Role::subscriber); }
  void stop(EndpointSession& session) override { hub_.leave(session); }
  void add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) override {
    hub_.tracks_changed(session, &tracks, nullptr);
  }
  void remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) override {
    hub_.tracks_changed(session, nullptr, &labels);
  }
  void relay(EndpointSession& session, const PeerLink& link, MessageKind /*kind*/, std::string payload) override {
    hub_.relay(session, link, std::move(payload));
  }

 private:
  friend class InMemoryHub;
  using Connector::report_error;

  InMemoryHub& hub_;
};

}  // namespace nstream
