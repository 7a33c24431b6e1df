#pragma once

// Payload schemas for the envelope kinds the broker itself interprets.
// OFFER/ANSWER/CANDIDATE payloads stay opaque at this layer.

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nstream/core/types.hpp"
#include "nstream/error.hpp"

namespace nstream {

nlohmann::json tracks_to_json(const std::vector<TrackDescriptor>& tracks);
std::vector<TrackDescriptor> tracks_from_json(const nlohmann::json& arr);

/// PUBLISH / SUBSCRIBE payload: `{"tracks":[...],"ping":"url url"}`, both optional.
struct JoinPayload {
  std::vector<TrackDescriptor> tracks;
  std::string ping;

  std::string dump() const;
  static JoinPayload parse(const std::string& text);
};

/// EVENT payload. `event` is one of welcome, published, subscribed,
/// publisher, subscriber, peer-gone, stopped.
struct EventPayload {
  std::string event;
  std::optional<EndpointId> peer;
  std::optional<EndpointId> endpoint;
  std::vector<TrackDescriptor> tracks;

  std::string dump() const;
  static EventPayload parse(const std::string& text);
};

struct ErrorPayload {
  Errc code = Errc::validation;
  std::string detail;

  std::string dump() const;
  static ErrorPayload parse(const std::string& text);
};

/// TRACKS_ADDED carries descriptors (upserted by label), TRACKS_REMOVED labels.
std::string tracks_added_payload(const std::vector<TrackDescriptor>& tracks);
std::string tracks_removed_payload(const std::vector<std::string>& labels);
std::vector<TrackDescriptor> parse_tracks_added(const std::string& text);
std::vector<std::string> parse_tracks_removed(const std::string& text);

/// PAUSE_HINT payload: `{"state":"pause"}` or `{"state":"play"}`.
std::string pause_hint_payload(bool playing);
bool parse_pause_hint(const std::string& text);

}  // namespace nstream
