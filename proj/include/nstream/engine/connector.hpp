#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "nstream/core/types.hpp"
#include "nstream/error.hpp"
#include "nstream/protocol/envelope.hpp"

namespace nstream {

class EndpointSession;
struct PeerLink;

/// The named-stream contract a session attaches to: publish, subscribe,
/// stop, add_tracks, remove_tracks, each taking the calling session.
///
/// Connectors that keep peer-link logic in the session (mesh) receive the
/// session's signaling data through relay(); connectors that own the media
/// path themselves (SFU) attach links directly. Callbacks into a session
/// are made from that session's scheduler.
class Connector {
 public:
  using ErrorSink = std::function<void(EndpointSession&, const Error&)>;

  virtual ~Connector() = default;

  virtual std::string_view scheme() const = 0;

  virtual void publish(EndpointSession& session) = 0;
  virtual void subscribe(EndpointSession& session) = 0;
  virtual void stop(EndpointSession& session) = 0;
  virtual void add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) = 0;
  virtual void remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) = 0;

  /// Signaling data (OFFER/ANSWER/CANDIDATE payload) for a link this
  /// connector owns, to be delivered to the link's counterpart.
  virtual void relay(EndpointSession& session, const PeerLink& link, MessageKind kind, std::string payload) = 0;

  /// Redirects service errors; a composite uses this to collect per-child
  /// failures instead of letting one child reset the session.
  void set_error_sink(ErrorSink sink) { error_sink_ = std::move(sink); }

 protected:
  void report_error(EndpointSession& session, const Error& error);

 private:
  ErrorSink error_sink_;
};

}  // namespace nstream
