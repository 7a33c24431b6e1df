#pragma once

#include <map>
#include <string>
#include <vector>

#include "nstream/engine/connector.hpp"
#include "nstream/engine/session.hpp"

namespace nstream {

/// Publishes one session through several child connectors at once.
/// Subscribers attach to the individual children. A failing child is
/// stopped and reported; the others keep running. Only when every child
/// has failed does the session itself see the error.
class SplitConnector final : public Connector {
 public:
  enum class ChildStatus { ok, failed };
  enum class Status { ok, partial, failed };

  explicit SplitConnector(std::vector<Connector*> children);

  std::string_view scheme() const override { return "split"; }
  void publish(EndpointSession& session) override;
  void subscribe(EndpointSession& session) override;
  void stop(EndpointSession& session) override;
  void add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) override;
  void remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) override;
  void relay(EndpointSession& session, const PeerLink& link, MessageKind kind, std::string payload) override;

  std::vector<ChildStatus> child_status(const EndpointSession& session) const;
  Status status(const EndpointSession& session) const;

 private:
  void on_child_error(std::size_t index, EndpointSession& session, const Error& error);

  std::vector<Connector*> children_;
  std::map<const EndpointSession*, std::vector<ChildStatus>> status_;
};

std::string_view to_string(SplitConnector::Status status) noexcept;

}  // namespace nstream
