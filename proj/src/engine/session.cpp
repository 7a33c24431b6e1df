#include "nstream/engine/session.hpp"

#include <algorithm>

#include "json.hpp"
#include "nstream/protocol/payloads.hpp"

namespace nstream {

using nlohmann::json;

namespace {

std::string describe_tracks(const std::vector<TrackDescriptor>& tracks) {
  std::string out;
  for (const auto& t : tracks) {
    if (!out.empty()) out += ',';
    out += std::string(to_string(t.kind)) + ':' + t.label + (t.enabled ? "" : ":off");
  }
  return out;
}

bool is_fatal(Errc code) {
  return code == Errc::publisher_conflict || code == Errc::stream_unknown || code == Errc::unauthorized ||
         code == Errc::transport;
}

const TrackDescriptor* find_track(const std::vector<TrackDescriptor>& tracks, const std::string& label) {
  for (const auto& t : tracks)
    if (t.label == label) return &t;
  return nullptr;
}

}  // namespace

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::publisher: return "publisher";
    case Role::subscriber: return "subscriber";
    case Role::unset: break;
  }
  return "unset";
}

void Connector::report_error(EndpointSession& session, const Error& error) {
  if (error_sink_) {
    error_sink_(session, error);
  } else {
    session.service_error(error);
  }
}

EndpointSession::EndpointSession(SessionContext ctx, StreamAddress address)
    : ctx_(std::move(ctx)), address_(std::move(address)) {
  auto alive = alive_;
  media_address_ = ctx_.media.bind([this, alive](const std::string& link_id, MediaItem item) {
    if (*alive) deliver(link_id, std::move(item));
  });
}

EndpointSession::~EndpointSession() {
  *alive_ = false;
  if (source_) source_->stop();
  ctx_.media.unbind(media_address_);
}

void EndpointSession::record(std::string kind, std::string detail) {
  transcript_.push_back({ctx_.scheduler.now(), std::move(kind), std::move(detail)});
}

// --- application side -----------------------------------------------------

void EndpointSession::begin(Role role, Connector* conn) {
  if (role_ != Role::unset)
    throw Error(Errc::role, "session already acts as " + std::string(to_string(role_)));
  if (role == Role::publisher && !source_) throw Error(Errc::state, "publish needs local media");
  role_ = role;
  connector_ = conn;
  last_error_.reset();
  record("role", std::string(to_string(role)));
  if (role == Role::publisher) {
    // Frames carry the digest form so subscribers never see the raw name.
    frame_stream_ = address_.stream.is_hashed() ? address_.stream.str() : hash_name(address_.stream.name()).str();
    tracks_ = source_->tracks();
    start_source();
  }
}

void EndpointSession::publish(Connector& conn) {
  begin(Role::publisher, &conn);
  conn.publish(*this);
}

void EndpointSession::publish() {
  begin(Role::publisher, nullptr);
  auto& entry = open_link(EndpointId("peer"), nullptr);
  json offer{{"link", entry.link.id}, {"type", "offer"}, {"addr", media_address_}, {"tracks", tracks_to_json(tracks_)}};
  entry.link.advance(LinkState::offer_sent);
  emit_signal(entry, MessageKind::offer, offer.dump());
}

void EndpointSession::subscribe(Connector& conn) {
  begin(Role::subscriber, &conn);
  conn.subscribe(*this);
}

void EndpointSession::subscribe() { begin(Role::subscriber, nullptr); }

void EndpointSession::stop() {
  if (role_ == Role::unset) return;
  auto* conn = connector_;
  reset_role();
  if (conn != nullptr) conn->stop(*this);
}

void EndpointSession::reset_role() {
  close_all_links();
  if (source_) source_->stop();
  role_ = Role::unset;
  connector_ = nullptr;
  send_queue_.clear();
  pending_frames_.clear();
  removed_labels_.clear();
  sink_->set_tracks({});
  record("role", "unset");
}

void EndpointSession::send(std::string text) {
  if (role_ == Role::unset) throw Error(Errc::role, "send needs a publish or subscribe");
  if (!channel_) {
    channel_ = true;
    record("channel", "open");
  }
  if (open_link_count() == 0) {
    send_queue_.push_back(std::move(text));
    if (send_queue_.size() > kSendQueueLimit) send_queue_.pop_front();
    return;
  }
  send_in_band(ChannelMessage{MessageKind::text, std::move(text)});
}

void EndpointSession::add_tracks(std::vector<TrackDescriptor> tracks) {
  if (role_ != Role::publisher) throw Error(Errc::role, "only a publisher owns tracks");
  auto merged = tracks_;
  merged.insert(merged.end(), tracks.begin(), tracks.end());
  require_unique_labels(merged);
  tracks_ = std::move(merged);
  if (source_ && source_->editable()) source_->set_tracks(tracks_);
  record("local-tracks", describe_tracks(tracks_));
  if (connector_ != nullptr) connector_->add_tracks(*this, tracks);
}

void EndpointSession::remove_tracks(const std::vector<std::string>& labels) {
  if (role_ != Role::publisher) throw Error(Errc::role, "only a publisher owns tracks");
  for (const auto& label : labels)
    if (find_track(tracks_, label) == nullptr) throw Error(Errc::track_unknown, "no track labelled " + label);
  std::erase_if(tracks_, [&](const TrackDescriptor& t) {
    return std::find(labels.begin(), labels.end(), t.label) != labels.end();
  });
  if (source_ && source_->editable()) source_->set_tracks(tracks_);
  record("local-tracks", describe_tracks(tracks_));
  if (connector_ != nullptr) connector_->remove_tracks(*this, labels);
}

void EndpointSession::set_playing(bool playing) {
  if (playing == playing_) return;
  if (role_ == Role::publisher && autopause_ && !playing) send_in_band({MessageKind::pause_hint, pause_hint_payload(false)});
  playing_ = playing;
  record("playing", playing ? "true" : "false");
  if (role_ == Role::publisher && autopause_ && playing) send_in_band({MessageKind::pause_hint, pause_hint_payload(true)});
}

void EndpointSession::set_muted(bool muted) {
  if (muted == muted_) return;
  muted_ = muted;
  record("muted", muted ? "true" : "false");
  std::vector<TrackDescriptor> changed;
  for (auto& t : tracks_) {
    if (t.kind != TrackKind::audio) continue;
    t.enabled = !muted;
    changed.push_back(t);
  }
  if (role_ == Role::publisher && connector_ != nullptr && !changed.empty()) connector_->add_tracks(*this, changed);
}

void EndpointSession::set_input(std::shared_ptr<MediaSource> source) {
  if (role_ == Role::subscriber) throw Error(Errc::role, "a subscriber has no input");
  if (source_) source_->stop();
  source_ = std::move(source);
  if (role_ != Role::publisher) return;
  auto before = tracks_;
  tracks_ = source_ ? source_->tracks() : std::vector<TrackDescriptor>{};
  if (source_) start_source();
  propagate_track_diff(before);
}

void EndpointSession::set_secret(std::optional<std::string> secret) {
  secret_ = std::move(secret);
  if (secret_ && !secret_->empty()) {
    sealer_.emplace(*secret_);
  } else {
    sealer_.reset();
  }
}

std::vector<PeerLink> EndpointSession::links() const {
  std::vector<PeerLink> out;
  for (const auto& e : links_) out.push_back(e.link);
  return out;
}

const PeerLink* EndpointSession::link(const std::string& id) const {
  for (const auto& e : links_)
    if (e.link.id == id) return &e.link;
  return nullptr;
}

std::size_t EndpointSession::open_link_count() const {
  return static_cast<std::size_t>(
      std::count_if(links_.begin(), links_.end(), [](const LinkEntry& e) { return e.link.state == LinkState::connected; }));
}

// --- media ------------------------------------------------------------------

void EndpointSession::start_source() {
  auto alive = alive_;
  source_->start(
      ctx_.scheduler,
      [this, alive](MediaFrame f) {
        if (*alive) on_local_frame(std::move(f));
      },
      [this, alive](const std::vector<TrackDescriptor>& tracks) {
        if (*alive) on_source_tracks(tracks);
      });
}

void EndpointSession::on_source_tracks(const std::vector<TrackDescriptor>& tracks) {
  if (role_ != Role::publisher) return;
  auto before = tracks_;
  tracks_ = tracks;
  if (muted_)
    for (auto& t : tracks_)
      if (t.kind == TrackKind::audio) t.enabled = false;
  propagate_track_diff(before);
}

void EndpointSession::propagate_track_diff(const std::vector<TrackDescriptor>& before) {
  if (connector_ == nullptr) return;
  std::vector<std::string> removed;
  for (const auto& t : before)
    if (find_track(tracks_, t.label) == nullptr) removed.push_back(t.label);
  std::vector<TrackDescriptor> added;
  for (const auto& t : tracks_) {
    const auto* old = find_track(before, t.label);
    if (old == nullptr || !(*old == t)) added.push_back(t);
  }
  if (!removed.empty()) connector_->remove_tracks(*this, removed);
  if (!added.empty()) connector_->add_tracks(*this, added);
}

void EndpointSession::on_local_frame(MediaFrame frame) {
  if (role_ != Role::publisher || !playing_) return;
  const auto* track = find_track(tracks_, frame.track_label);
  if (track == nullptr || !track->enabled) return;
  frame.stream = frame_stream_;
  if (sealer_) frame = sealer_->seal(std::move(frame));
  bool sent = false;
  for (auto& e : links_) {
    if (e.link.state != LinkState::connected || !e.port) continue;
    e.port->send(frame);
    ++e.link.frames_sent;
    sent = true;
  }
  if (sent) ++frames_emitted_[frame.track_label];
}

void EndpointSession::send_in_band(const ChannelMessage& msg) {
  for (auto& e : links_) {
    if (e.link.state == LinkState::connected && e.port) e.port->send(msg);
  }
}

void EndpointSession::flush_send_queue() {
  while (!send_queue_.empty()) {
    auto text = std::move(send_queue_.front());
    send_queue_.pop_front();
    send_in_band(ChannelMessage{MessageKind::text, std::move(text)});
  }
}

void EndpointSession::deliver(const std::string& link_id, MediaItem item) {
  auto* entry = find_link(link_id);
  if (entry == nullptr || entry->link.state == LinkState::closed) {
    if (auto* f = std::get_if<MediaFrame>(&item)) note_drop(f->track_label);
    return;
  }
  if (auto* msg = std::get_if<ChannelMessage>(&item)) {
    if (msg->kind == MessageKind::pause_hint) {
      bool play = parse_pause_hint(msg->payload);
      sink_->remote_paused = !play;
      record("hint", play ? "play" : "pause");
    } else {
      record("message", msg->payload);
      if (message_handler_) message_handler_(msg->payload);
    }
    return;
  }
  auto& frame = std::get<MediaFrame>(item);
  if (entry->link.state != LinkState::connected) {
    note_drop(frame.track_label);
    return;
  }
  accept_frame(*entry, std::move(frame));
}

void EndpointSession::accept_frame(LinkEntry& entry, MediaFrame frame) {
  ++entry.link.frames_received;
  if (frame.sealed || sealer_) {
    try {
      if (!sealer_) throw Error(Errc::integrity, "sealed frame but no secret");
      frame = sealer_->open(std::move(frame));
    } catch (const Error&) {
      ++integrity_errors_;
      ++dropped_by_track_[frame.track_label];
      return;
    }
  }
  if (role_ != Role::subscriber || !playing_ || removed_labels_.count(frame.track_label) != 0) {
    note_drop(frame.track_label);
    return;
  }
  if (find_track(sink_->tracks(), frame.track_label) == nullptr) {
    auto& q = pending_frames_[frame.track_label];
    q.push_back(std::move(frame));
    if (q.size() > kPendingFramesPerTrack) {
      note_drop(q.front().track_label);
      q.pop_front();
    }
    return;
  }
  record("frame", frame.track_label + ' ' + std::to_string(frame.seq) + ' ' + std::to_string(frame.ts_ms) + ' ' +
                      payload_digest(frame.payload));
  sink_->push(frame);
}

void EndpointSession::note_drop(const std::string& label) {
  ++frames_dropped_;
  ++dropped_by_track_[label];
}

void EndpointSession::flush_pending() {
  for (auto it = pending_frames_.begin(); it != pending_frames_.end();) {
    if (find_track(sink_->tracks(), it->first) == nullptr) {
      ++it;
      continue;
    }
    auto frames = std::move(it->second);
    it = pending_frames_.erase(it);
    for (auto& f : frames) {
      record("frame", f.track_label + ' ' + std::to_string(f.seq) + ' ' + std::to_string(f.ts_ms) + ' ' +
                          payload_digest(f.payload));
      sink_->push(f);
    }
  }
}

void EndpointSession::set_remote_tracks(std::vector<TrackDescriptor> tracks, bool force) {
  if (!force && tracks == sink_->tracks()) return;
  for (const auto& t : tracks) removed_labels_.erase(t.label);
  sink_->set_tracks(std::move(tracks));
  record("tracks", describe_tracks(sink_->tracks()));
  flush_pending();
}

// --- links ------------------------------------------------------------------

EndpointSession::LinkEntry* EndpointSession::find_link(const std::string& id) {
  for (auto& e : links_)
    if (e.link.id == id) return &e;
  return nullptr;
}

EndpointSession::LinkEntry& EndpointSession::open_link(const EndpointId& counterpart, Connector* owner) {
  LinkEntry entry{PeerLink(ctx_.uid + "#" + std::to_string(next_link_++), counterpart), owner, nullptr, {}};
  links_.push_back(std::move(entry));
  return links_.back();
}

void EndpointSession::emit_signal(LinkEntry& entry, MessageKind kind, std::string payload) {
  if (entry.owner != nullptr) {
    entry.owner->relay(*this, entry.link, kind, std::move(payload));
    return;
  }
  auto alive = alive_;
  ctx_.scheduler.post([this, alive, payload = std::move(payload)]() mutable {
    if (*alive && data_handler_) data_handler_(std::move(payload));
  });
}

void EndpointSession::on_connected(LinkEntry& entry) {
  record("connected", entry.link.id);
  flush_send_queue();
}

void EndpointSession::close_link(LinkEntry& entry) {
  if (entry.link.state == LinkState::closed) return;
  bool was_connected = entry.link.state == LinkState::connected;
  entry.link.advance(LinkState::closed);
  entry.port.reset();
  if (was_connected) record("disconnected", entry.link.id);
}

void EndpointSession::close_all_links() {
  for (auto& e : links_) close_link(e);
}

void EndpointSession::apply(std::string_view payload, const std::optional<EndpointId>& from, Connector* via) {
  if (role_ == Role::unset) return;
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::exception& e) {
    throw Error(Errc::validation, std::string("bad signaling data: ") + e.what());
  }
  if (!j.is_object() || !j.contains("link") || !j.contains("type") || !j["link"].is_string() || !j["type"].is_string())
    throw Error(Errc::validation, "signaling data needs link and type");
  auto id = j["link"].get<std::string>();
  auto type = j["type"].get<std::string>();
  auto* entry = find_link(id);

  if (type == "offer") {
    if (role_ != Role::subscriber) throw Error(Errc::state, "offer received by a " + std::string(to_string(role_)));
    if (entry != nullptr) {
      if (entry->last_offer == payload) return;
      throw Error(Errc::state, "second offer on link " + id);
    }
    // A subscriber keeps at most one link; a fresh offer supersedes a stale one.
    close_all_links();
    links_.push_back(LinkEntry{PeerLink(id, from.value_or(EndpointId("peer"))), via, nullptr, std::string(payload)});
    auto& e = links_.back();
    e.link.advance(LinkState::offer_received);
    e.port = ctx_.media.port(media_address_, j.value("addr", ""), id);
    auto tracks = tracks_from_json(j.value("tracks", json::array()));
    e.link.negotiated_tracks = tracks;
    json answer{{"link", id}, {"type", "answer"}, {"addr", media_address_}};
    emit_signal(e, MessageKind::answer, answer.dump());
    json cand{{"link", id}, {"type", "candidate"}, {"candidate", "sim " + media_address_}};
    emit_signal(e, MessageKind::candidate, cand.dump());
    e.link.advance(LinkState::connected);
    set_remote_tracks(std::move(tracks), true);
    on_connected(e);
    return;
  }
  if (type == "answer") {
    if (entry == nullptr) {
      bool outstanding = std::any_of(links_.begin(), links_.end(),
                                     [](const LinkEntry& e) { return e.link.state == LinkState::offer_sent; });
      if (!outstanding) throw Error(Errc::state, "answer without an outstanding offer");
      throw Error(Errc::link_unknown, "unknown link " + id);
    }
    if (entry->link.state == LinkState::closed) return;
    if (entry->link.state == LinkState::connected) return;
    entry->link.advance(LinkState::connected);
    entry->port = ctx_.media.port(media_address_, j.value("addr", ""), id);
    entry->link.negotiated_tracks = tracks_;
    on_connected(*entry);
    return;
  }
  if (type == "candidate") {
    if (entry == nullptr) throw Error(Errc::link_unknown, "unknown link " + id);
    if (entry->link.state != LinkState::closed) ++entry->link.candidates;
    return;
  }
  throw Error(Errc::validation, "unknown signaling type " + type);
}

void EndpointSession::peer_joined(const EndpointId& peer, Connector& via) {
  if (role_ != Role::publisher) return;
  for (const auto& e : links_)
    if (e.link.counterpart == peer && e.link.state != LinkState::closed) return;
  auto& entry = open_link(peer, &via);
  json offer{{"link", entry.link.id}, {"type", "offer"}, {"addr", media_address_}, {"tracks", tracks_to_json(tracks_)}};
  json cand{{"link", entry.link.id}, {"type", "candidate"}, {"candidate", "sim " + media_address_}};
  entry.link.advance(LinkState::offer_sent);
  emit_signal(entry, MessageKind::offer, offer.dump());
  emit_signal(entry, MessageKind::candidate, cand.dump());
}

void EndpointSession::publisher_available(const EndpointId& publisher) {
  if (role_ != Role::subscriber) return;
  record("publisher-live", publisher.str());
}

void EndpointSession::peer_left(const EndpointId& peer) {
  bool touched = false;
  for (auto& e : links_) {
    if (e.link.counterpart == peer && e.link.state != LinkState::closed) {
      close_link(e);
      touched = true;
    }
  }
  if (touched && role_ == Role::subscriber) {
    sink_->set_tracks({});
    pending_frames_.clear();
    sink_->remote_paused = false;
  }
}

void EndpointSession::links_lost(Connector& via) {
  bool touched = false;
  for (auto& e : links_) {
    if (e.owner == &via && e.link.state != LinkState::closed) {
      close_link(e);
      touched = true;
    }
  }
  if (touched && role_ == Role::subscriber) {
    sink_->set_tracks({});
    pending_frames_.clear();
  }
}

void EndpointSession::detach_link(const std::string& link_id) {
  auto* e = find_link(link_id);
  if (e == nullptr || e->link.state == LinkState::closed) return;
  close_link(*e);
  if (role_ == Role::subscriber) {
    sink_->set_tracks({});
    pending_frames_.clear();
  }
}

void EndpointSession::attach_link(const std::string& link_id, const EndpointId& counterpart,
                                  std::shared_ptr<MediaPort> port, Connector& via,
                                  std::vector<TrackDescriptor> remote_tracks) {
  if (role_ == Role::unset) return;
  if (auto* old = find_link(link_id)) {
    if (old->link.state != LinkState::closed) return;
    std::erase_if(links_, [&](const LinkEntry& e) { return e.link.id == link_id; });
  }
  if (role_ == Role::subscriber) close_all_links();
  links_.push_back(LinkEntry{PeerLink(link_id, counterpart), &via, std::move(port), {}});
  auto& e = links_.back();
  e.link.advance(role_ == Role::publisher ? LinkState::offer_sent : LinkState::offer_received);
  e.link.advance(LinkState::connected);
  if (role_ == Role::subscriber) {
    e.link.negotiated_tracks = remote_tracks;
    set_remote_tracks(std::move(remote_tracks), true);
  } else {
    e.link.negotiated_tracks = tracks_;
  }
  on_connected(e);
}

void EndpointSession::remote_tracks_added(const std::vector<TrackDescriptor>& tracks) {
  if (role_ != Role::subscriber) return;
  auto merged = sink_->tracks();
  for (const auto& t : tracks) {
    auto it = std::find_if(merged.begin(), merged.end(), [&](const TrackDescriptor& m) { return m.label == t.label; });
    if (it == merged.end()) {
      merged.push_back(t);
    } else {
      *it = t;
    }
  }
  set_remote_tracks(std::move(merged), false);
}

void EndpointSession::remote_tracks_removed(const std::vector<std::string>& labels) {
  if (role_ != Role::subscriber) return;
  auto remaining = sink_->tracks();
  std::erase_if(remaining, [&](const TrackDescriptor& t) {
    return std::find(labels.begin(), labels.end(), t.label) != labels.end();
  });
  for (const auto& l : labels) {
    removed_labels_.insert(l);
    pending_frames_.erase(l);
  }
  if (remaining.size() != sink_->tracks().size()) {
    sink_->set_tracks(std::move(remaining));
    record("tracks", describe_tracks(sink_->tracks()));
  }
}

void EndpointSession::service_error(const Error& error) {
  last_error_ = error;
  record("error", std::string(to_string(error.code())));
  if (!is_fatal(error.code()) || role_ == Role::unset) return;
  auto* conn = connector_;
  reset_role();
  if (conn != nullptr) conn->stop(*this);
}

}  // namespace nstream
