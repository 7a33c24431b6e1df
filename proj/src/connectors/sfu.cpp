#include "nstream/connectors/sfu.hpp"

#include "json.hpp"
#include "nstream/engine/frame_line.hpp"
#include "nstream/protocol/codec.hpp"
#include "nstream/protocol/payloads.hpp"
#include "nstream/protocol/routing.hpp"

namespace nstream {

using nlohmann::json;

namespace {

std::string event_payload(std::string event, std::optional<EndpointId> peer = std::nullopt,
                          std::vector<TrackDescriptor> tracks = {}) {
  EventPayload ev;
  ev.event = std::move(event);
  ev.peer = std::move(peer);
  ev.tracks = std::move(tracks);
  return ev.dump();
}

void upsert(std::vector<TrackDescriptor>& tracks, const std::vector<TrackDescriptor>& changes) {
  for (const auto& t : changes) {
    auto it = std::find_if(tracks.begin(), tracks.end(), [&](const TrackDescriptor& x) { return x.label == t.label; });
    if (it == tracks.end()) {
      tracks.push_back(t);
    } else {
      *it = t;
    }
  }
}

}  // namespace

// --- service ------------------------------------------------------------------

void SfuService::on_open(const std::shared_ptr<LinePeer>& peer) {
  EndpointId ep("sfu-ep-" + std::to_string(next_id_++));
  endpoints_.emplace(peer.get(), Endpoint{peer, ep, {}, false, {}});
  by_id_.emplace(ep, peer.get());
  EventPayload welcome;
  welcome.event = "welcome";
  welcome.endpoint = ep;
  SignalEnvelope env;
  env.from = self_;
  env.to = ep;
  env.kind = MessageKind::event;
  env.seq = endpoints_.at(peer.get()).seq.next(std::nullopt);
  env.payload = welcome.dump();
  peer->send(encode(env));
}

void SfuService::on_close(const std::shared_ptr<LinePeer>& peer) {
  auto it = endpoints_.find(peer.get());
  if (it == endpoints_.end()) return;
  auto refs = it->second.refs;
  for (const auto& [name, _] : refs) leave(it->second, name);
  by_id_.erase(it->second.ep);
  endpoints_.erase(it);
}

std::size_t SfuService::endpoint_links() const {
  std::size_t n = 0;
  for (const auto& [_, e] : endpoints_) n += e.link_up ? 1 : 0;
  return n;
}

void SfuService::send(const EndpointId& to, std::optional<StreamName> stream, MessageKind kind, std::string payload,
                      const EndpointId& from) {
  auto it = by_id_.find(to);
  if (it == by_id_.end()) return;
  auto& e = endpoints_.at(it->second);
  SignalEnvelope env;
  if (stream) {
    auto ref = e.refs.find(*stream);
    env.stream = ref != e.refs.end() ? ref->second : StreamRef::raw(*stream);
  }
  env.from = from;
  env.kind = kind;
  env.seq = e.seq.next(env.stream);
  env.payload = std::move(payload);
  e.peer->send(encode(env));
}

void SfuService::send_error(Endpoint& e, const std::optional<StreamRef>& stream, const Error& err) {
  SignalEnvelope env;
  env.stream = stream;
  env.from = self_;
  env.to = e.ep;
  env.kind = MessageKind::error;
  env.seq = e.seq.next(stream);
  env.payload = ErrorPayload{err.code(), err.what()}.dump();
  e.peer->send(encode(env));
}

void SfuService::leave(Endpoint& e, const StreamName& name) {
  e.refs.erase(name);
  const auto* rec = rooms_.find(name);
  if (rec == nullptr || !rec->is_member(e.ep)) return;
  auto before = *rec;
  rooms_.store(detach(before, e.ep), sched_.now());
  if (before.publisher == e.ep) {
    for (const auto& sub : before.subscribers) send(sub, name, MessageKind::event, event_payload("peer-gone", e.ep), self_);
  } else if (before.publisher) {
    send(*before.publisher, name, MessageKind::event, event_payload("peer-gone", e.ep), self_);
  }
}

void SfuService::on_line(const std::shared_ptr<LinePeer>& peer, std::string_view line) {
  auto it = endpoints_.find(peer.get());
  if (it == endpoints_.end()) return;
  auto& e = it->second;
  if (is_frame_line(line)) {
    forward_frame(e, line);
    return;
  }
  SignalEnvelope env;
  try {
    env = decode(line);
  } catch (const Error& err) {
    send_error(e, std::nullopt, err);
    return;
  }
  try {
    handle(e, env);
  } catch (const Error& err) {
    send_error(e, env.stream, err);
  }
}

void SfuService::handle(Endpoint& e, const SignalEnvelope& env) {
  if (env.from != e.ep) throw Error(Errc::validation, "from does not match the connection");
  if (!env.stream) {
    if (env.kind != MessageKind::offer) throw Error(Errc::kind, "only link negotiation is session scoped");
    auto offer = json::parse(env.payload, nullptr, false);
    if (offer.is_discarded() || !offer.contains("link")) throw Error(Errc::validation, "offer without link id");
    e.link_up = true;
    json answer{{"link", offer["link"]}, {"type", "answer"}};
    SignalEnvelope reply;
    reply.from = self_;
    reply.to = e.ep;
    reply.kind = MessageKind::answer;
    reply.seq = e.seq.next(std::nullopt);
    reply.payload = answer.dump();
    e.peer->send(encode(reply));
    return;
  }

  const auto& ref = *env.stream;
  auto now = sched_.now();
  if (env.kind == MessageKind::publish || env.kind == MessageKind::subscribe) {
    std::optional<StreamName> name;
    if (!ref.is_hashed()) {
      name = ref.name();
    } else if (env.kind == MessageKind::subscribe) {
      name = rooms_.resolve(ref);
      if (!name) throw Error(Errc::stream_unknown, "no stream for " + ref.str());
    } else {
      throw Error(Errc::validation, "publish needs the raw stream name");
    }
    auto join = JoinPayload::parse(env.payload);
    StreamRecord rec = rooms_.ensure(*name, now);
    if (env.kind == MessageKind::publish) {
      rec = set_tracks(attach_publisher(std::move(rec), e.ep), join.tracks);
    } else {
      rec = attach_subscriber(std::move(rec), e.ep);
    }
    rooms_.store(rec, now);
    e.refs.insert_or_assign(*name, ref);
    if (env.kind == MessageKind::publish) {
      send(e.ep, *name, MessageKind::event, event_payload("published"), self_);
      for (const auto& sub : rec.subscribers)
        send(sub, *name, MessageKind::event, event_payload("publisher", e.ep, rec.tracks), self_);
    } else {
      send(e.ep, *name, MessageKind::event, event_payload("subscribed"), self_);
      if (rec.publisher) send(e.ep, *name, MessageKind::event, event_payload("publisher", *rec.publisher, rec.tracks), self_);
    }
    return;
  }

  auto name = rooms_.resolve(ref);
  if (!name) throw Error(Errc::stream_unknown, "no stream for " + ref.str());
  if (env.kind == MessageKind::stop) {
    leave(e, *name);
    return;
  }
  const auto& rec = *rooms_.find(*name);
  switch (env.kind) {
    case MessageKind::tracks_added:
    case MessageKind::tracks_removed:
    case MessageKind::text:
    case MessageKind::pause_hint: {
      auto targets = route_rule(env.kind, rec, e.ep, env.to);
      if (env.kind == MessageKind::tracks_added) {
        auto tracks = rec.tracks;
        upsert(tracks, parse_tracks_added(env.payload));
        rooms_.store(set_tracks(rec, std::move(tracks)), now);
      } else if (env.kind == MessageKind::tracks_removed) {
        auto labels = parse_tracks_removed(env.payload);
        auto tracks = rec.tracks;
        std::erase_if(tracks, [&](const TrackDescriptor& t) {
          return std::find(labels.begin(), labels.end(), t.label) != labels.end();
        });
        rooms_.store(set_tracks(rec, std::move(tracks)), now);
      }
      for (const auto& to : targets) send(to, *name, env.kind, env.payload, e.ep);
      return;
    }
    default:
      throw Error(Errc::kind, "the SFU does not relay " + std::string(to_string(env.kind)));
  }
}

void SfuService::forward_frame(Endpoint& e, std::string_view line) {
  MediaFrame frame;
  try {
    frame = decode_frame_line(line);
  } catch (const Error& err) {
    send_error(e, std::nullopt, err);
    return;
  }
  std::optional<StreamName> name;
  try {
    name = rooms_.resolve(StreamRef::parse(frame.stream));
  } catch (const Error&) {
  }
  if (!name) return;
  const auto* rec = rooms_.find(*name);
  if (rec == nullptr || rec->publisher != e.ep) return;
  ++frames_in_;
  for (const auto& sub : rec->subscribers) {
    auto it = by_id_.find(sub);
    if (it == by_id_.end()) continue;
    auto& target = endpoints_.at(it->second);
    auto ref = target.refs.find(*name);
    frame.stream = ref != target.refs.end() ? ref->second.str() : name->str();
    target.peer->send(encode_frame_line(frame));
    ++frames_forwarded_;
  }
}

// --- connector ----------------------------------------------------------------

class SfuPort final : public MediaPort {
 public:
  SfuPort(SfuConnector& conn, std::shared_ptr<bool> alive, StreamRef stream)
      : conn_(conn), alive_(std::move(alive)), stream_(std::move(stream)) {}

  void send(MediaItem item) override {
    if (!*alive_) return;
    if (auto* f = std::get_if<MediaFrame>(&item)) {
      conn_.send_raw(encode_frame_line(*f));
    } else {
      auto& msg = std::get<ChannelMessage>(item);
      conn_.send(stream_, msg.kind, msg.payload);
    }
  }

 private:
  SfuConnector& conn_;
  std::shared_ptr<bool> alive_;
  StreamRef stream_;
};

SfuConnector::SfuConnector(TransportFactory factory, std::string endpoint_label, std::string origin)
    : factory_(std::move(factory)), link_id_(std::move(endpoint_label) + "/sfu"), origin_(std::move(origin)) {}

SfuConnector::~SfuConnector() {
  *alive_ = false;
  if (transport_) transport_->close();
}

void SfuConnector::ensure_connected(EndpointSession& session) {
  if (transport_) return;
  transport_ = factory_(origin_.empty() ? session.address().origin() : origin_, "/sfu");
  auto alive = alive_;
  transport_->open({
      [] {},
      [this, alive](std::string line) {
        if (*alive) on_line(line);
      },
      [this, alive](std::string reason) {
        if (*alive) on_lost(reason);
      },
  });
}

void SfuConnector::send(const std::optional<StreamRef>& stream, MessageKind kind, std::string payload) {
  if (!ep_ || !transport_) return;
  SignalEnvelope env;
  env.stream = stream;
  env.from = *ep_;
  env.kind = kind;
  env.seq = seq_.next(stream);
  env.payload = std::move(payload);
  transport_->send(encode(env));
}

void SfuConnector::send_raw(std::string line) {
  if (transport_) transport_->send(std::move(line));
}

EndpointSession* SfuConnector::session_for(const std::string& stream_text) {
  for (auto& [_, m] : members_)
    if (m.session->address().stream.str() == stream_text) return m.session;
  return nullptr;
}

void SfuConnector::join(EndpointSession& session, Member& m) {
  JoinPayload join;
  if (m.role == Role::publisher) join.tracks = session.tracks();
  join.ping = session.ping();
  send(session.address().stream, m.role == Role::publisher ? MessageKind::publish : MessageKind::subscribe, join.dump());
  m.joined = true;
}

void SfuConnector::publish(EndpointSession& session) {
  stop(session);
  auto& m = members_.insert_or_assign(&session, Member{&session, Role::publisher}).first->second;
  ensure_connected(session);
  if (link_up_) join(session, m);
}

void SfuConnector::subscribe(EndpointSession& session) {
  stop(session);
  auto& m = members_.insert_or_assign(&session, Member{&session, Role::subscriber}).first->second;
  ensure_connected(session);
  if (link_up_) join(session, m);
}

void SfuConnector::stop(EndpointSession& session) {
  auto it = members_.find(&session);
  if (it == members_.end()) return;
  if (it->second.joined) send(session.address().stream, MessageKind::stop, "");
  members_.erase(it);
}

void SfuConnector::add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) {
  if (members_.contains(&session)) send(session.address().stream, MessageKind::tracks_added, tracks_added_payload(tracks));
}

void SfuConnector::remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) {
  if (members_.contains(&session))
    send(session.address().stream, MessageKind::tracks_removed, tracks_removed_payload(labels));
}

void SfuConnector::relay(EndpointSession& /*session*/, const PeerLink& /*link*/, MessageKind /*kind*/,
                         std::string /*payload*/) {
  // Links to the SFU are negotiated by the connector itself.
}

void SfuConnector::on_line(const std::string& line) {
  if (is_frame_line(line)) {
    try {
      auto frame = decode_frame_line(line);
      if (auto* s = session_for(frame.stream)) s->deliver(link_id_, std::move(frame));
    } catch (const Error&) {
    }
    return;
  }
  SignalEnvelope env;
  try {
    env = decode(line);
  } catch (const Error&) {
    return;
  }
  EndpointSession* session = env.stream ? session_for(env.stream->str()) : nullptr;
  if (session != nullptr) session->record("wire-in", line);
  try {
    if (!env.stream) {
      if (env.kind == MessageKind::event) {
        auto ev = EventPayload::parse(env.payload);
        if (ev.event == "welcome" && ev.endpoint) {
          ep_ = *ev.endpoint;
          send(std::nullopt, MessageKind::offer, json{{"link", link_id_}, {"type", "offer"}}.dump());
        }
      } else if (env.kind == MessageKind::answer) {
        link_up_ = true;
        for (auto& [s, m] : members_)
          if (!m.joined) join(*m.session, m);
      } else if (env.kind == MessageKind::error) {
        auto err = ErrorPayload::parse(env.payload);
        std::vector<EndpointSession*> all;
        for (auto& [_, m] : members_) all.push_back(m.session);
        for (auto* s : all) report_error(*s, Error(err.code, err.detail));
      }
      return;
    }
    if (session == nullptr) return;
    switch (env.kind) {
      case MessageKind::event: {
        auto ev = EventPayload::parse(env.payload);
        auto port = std::make_shared<SfuPort>(*this, alive_, session->address().stream);
        if (ev.event == "published") {
          session->attach_link(link_id_, EndpointId("sfu"), port, *this, {});
        } else if (ev.event == "publisher" && ev.peer) {
          session->publisher_available(*ev.peer);
          session->attach_link(link_id_, EndpointId("sfu"), port, *this, ev.tracks);
        } else if (ev.event == "peer-gone") {
          if (session->role() == Role::subscriber) session->detach_link(link_id_);
        }
        break;
      }
      case MessageKind::tracks_added:
        session->remote_tracks_added(parse_tracks_added(env.payload));
        break;
      case MessageKind::tracks_removed:
        session->remote_tracks_removed(parse_tracks_removed(env.payload));
        break;
      case MessageKind::text:
      case MessageKind::pause_hint:
        session->deliver(link_id_, ChannelMessage{env.kind, env.payload});
        break;
      case MessageKind::error: {
        auto err = ErrorPayload::parse(env.payload);
        report_error(*session, Error(err.code, err.detail));
        break;
      }
      default:
        break;
    }
  } catch (const Error& e) {
    if (session != nullptr) session->record("error", std::string(to_string(e.code())));
  }
}

void SfuConnector::on_lost(const std::string& reason) {
  transport_.reset();
  link_up_ = false;
  ep_.reset();
  std::vector<EndpointSession*> all;
  for (auto& [_, m] : members_) all.push_back(m.session);
  members_.clear();
  for (auto* s : all) {
    s->links_lost(*this);
    report_error(*s, Error(Errc::transport, "SFU unreachable: " + reason));
  }
}

}  // namespace nstream
