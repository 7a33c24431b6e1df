#include "nstream/engine/peer_link.hpp"

#include "nstream/error.hpp"

namespace nstream {

std::string_view to_string(LinkState state) noexcept {
  switch (state) {
    case LinkState::fresh: return "new";
    case LinkState::offer_sent: return "offer-sent";
    case LinkState::offer_received: return "offer-received";
    case LinkState::connected: return "connected";
    case LinkState::closed: return "closed";
  }
  return "closed";
}

bool legal_transition(LinkState from, LinkState to) noexcept {
  if (to == LinkState::closed) return true;
  switch (from) {
    case LinkState::fresh: return to == LinkState::offer_sent || to == LinkState::offer_received;
    case LinkState::offer_sent:
    case LinkState::offer_received: return to == LinkState::connected;
    default: return false;
  }
}

void PeerLink::advance(LinkState next) {
  if (!legal_transition(state, next))
    throw Error(Errc::state, "illegal link transition " + std::string(to_string(state)) + " -> " +
                                 std::string(to_string(next)) + " on " + id);
  state = next;
}

}  // namespace nstream
