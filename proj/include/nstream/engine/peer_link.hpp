#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nstream/core/types.hpp"

namespace nstream {

enum class LinkState { fresh, offer_sent, offer_received, connected, closed };

/// "new", "offer-sent", "offer-received", "connected", "closed".
std::string_view to_string(LinkState state) noexcept;

/// new->offer-sent->connected, new->offer-received->connected, any->closed.
bool legal_transition(LinkState from, LinkState to) noexcept;

/// Simulated peer connection between a publisher and one counterpart.
/// Frames flow only while connected.
struct PeerLink {
  std::string id;
  LinkState state = LinkState::fresh;
  EndpointId counterpart;
  std::vector<TrackDescriptor> negotiated_tracks;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t candidates = 0;

  PeerLink(std::string link_id, EndpointId peer) : id(std::move(link_id)), counterpart(std::move(peer)) {}

  /// Throws Errc::state on an illegal transition.
  void advance(LinkState next);
};

}  // namespace nstream
