#include "nstream/protocol/payloads.hpp"

namespace nstream {

using nlohmann::json;

namespace {

json parse_object(const std::string& text) {
  if (text.empty()) return json::object();
  try {
    auto j = json::parse(text);
    if (!j.is_object()) throw Error(Errc::validation, "payload is not an object");
    return j;
  } catch (const json::exception& e) {
    throw Error(Errc::validation, std::string("bad payload: ") + e.what());
  }
}

}  // namespace

json tracks_to_json(const std::vector<TrackDescriptor>& tracks) {
  json arr = json::array();
  for (const auto& t : tracks) {
    arr.push_back({{"kind", std::string(to_string(t.kind))}, {"label", t.label}, {"enabled", t.enabled}});
  }
  return arr;
}

std::vector<TrackDescriptor> tracks_from_json(const json& arr) {
  if (!arr.is_array()) throw Error(Errc::validation, "tracks must be an array");
  std::vector<TrackDescriptor> out;
  for (const auto& item : arr) {
    if (!item.is_object() || !item.contains("label") || !item.contains("kind"))
      throw Error(Errc::validation, "malformed track descriptor");
    TrackDescriptor t;
    t.kind = track_kind_from_string(item.at("kind").get<std::string>());
    t.label = item.at("label").get<std::string>();
    t.enabled = item.value("enabled", true);
    out.push_back(std::move(t));
  }
  require_unique_labels(out);
  return out;
}

std::string JoinPayload::dump() const {
  json j = json::object();
  if (!tracks.empty()) j["tracks"] = tracks_to_json(tracks);
  if (!ping.empty()) j["ping"] = ping;
  return j.dump();
}

JoinPayload JoinPayload::parse(const std::string& text) {
  auto j = parse_object(text);
  JoinPayload p;
  if (j.contains("tracks")) p.tracks = tracks_from_json(j.at("tracks"));
  if (j.contains("ping")) p.ping = j.at("ping").get<std::string>();
  return p;
}

std::string EventPayload::dump() const {
  json j{{"event", event}};
  if (peer) j["peer"] = peer->str();
  if (endpoint) j["endpoint"] = endpoint->str();
  if (!tracks.empty()) j["tracks"] = tracks_to_json(tracks);
  return j.dump();
}

EventPayload EventPayload::parse(const std::string& text) {
  auto j = parse_object(text);
  EventPayload p;
  p.event = j.value("event", "");
  if (j.contains("peer")) p.peer = EndpointId(j.at("peer").get<std::string>());
  if (j.contains("endpoint")) p.endpoint = EndpointId(j.at("endpoint").get<std::string>());
  if (j.contains("tracks")) p.tracks = tracks_from_json(j.at("tracks"));
  return p;
}

std::string ErrorPayload::dump() const {
  return json{{"code", std::string(to_string(code))}, {"detail", detail}}.dump();
}

ErrorPayload ErrorPayload::parse(const std::string& text) {
  auto j = parse_object(text);
  ErrorPayload p;
  p.code = errc_from_string(j.value("code", "ValidationError"));
  p.detail = j.value("detail", "");
  return p;
}

std::string tracks_added_payload(const std::vector<TrackDescriptor>& tracks) {
  return json{{"tracks", tracks_to_json(tracks)}}.dump();
}

std::string tracks_removed_payload(const std::vector<std::string>& labels) {
  return json{{"labels", labels}}.dump();
}

std::vector<TrackDescriptor> parse_tracks_added(const std::string& text) {
  auto j = parse_object(text);
  return tracks_from_json(j.value("tracks", json::array()));
}

std::vector<std::string> parse_tracks_removed(const std::string& text) {
  auto j = parse_object(text);
  return j.value("labels", std::vector<std::string>{});
}

std::string pause_hint_payload(bool playing) { return json{{"state", playing ? "play" : "pause"}}.dump(); }

bool parse_pause_hint(const std::string& text) {
  auto state = parse_object(text).value("state", "");
  if (state == "play") return true;
  if (state == "pause") return false;
  throw Error(Errc::validation, "bad pause hint state");
}

}  // namespace nstream
