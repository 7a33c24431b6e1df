#pragma once

#include <optional>
#include <vector>

#include "nstream/core/stream_record.hpp"
#include "nstream/protocol/envelope.hpp"

namespace nstream {

/// Recipients of an envelope of `kind` sent by `from` on `rec`.
///
/// - OFFER/ANSWER/CANDIDATE need an explicit `to` on the other side of a
///   publisher/subscriber pair.
/// - TEXT, EVENT, ERROR: publisher to every subscriber (or the one named by
///   `to`), subscriber to the publisher.
/// - PAUSE_HINT and TRACKS_*: publisher only, to every subscriber.
/// - PUBLISH/SUBSCRIBE/STOP are not relayed; the result is empty.
///
/// Never includes `from`. Throws Errc::membership for non-members and
/// Errc::role for role violations.
std::vector<EndpointId> route_rule(MessageKind kind, const StreamRecord& rec, const EndpointId& from,
                                   const std::optional<EndpointId>& to = std::nullopt);

}  // namespace nstream
