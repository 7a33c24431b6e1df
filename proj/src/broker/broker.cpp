#include "nstream/broker/broker.hpp"

#include <algorithm>

#include "json.hpp"
#include "nstream/protocol/codec.hpp"
#include "nstream/protocol/payloads.hpp"
#include "nstream/protocol/routing.hpp"

namespace nstream {

Broker::Broker(Scheduler& sched, Options options, WebhookSink* webhooks)
    : sched_(sched), options_(options), webhooks_(webhooks) {
  schedule_gc();
}

Broker::~Broker() {
  *alive_ = false;
  if (gc_timer_ != 0) sched_.cancel(gc_timer_);
}

void Broker::schedule_gc() {
  auto period = std::max(Millis(1000), options_.idle_grace / 2);
  auto alive = alive_;
  gc_timer_ = sched_.post_after(period, [this, alive] {
    if (!*alive) return;
    collect_idle();
    schedule_gc();
  });
}

std::size_t Broker::collect_idle() { return registry_.collect_idle(sched_.now(), options_.idle_grace); }

Broker::Session* Broker::session(const EndpointId& ep) {
  auto it = by_id_.find(ep);
  return it == by_id_.end() ? nullptr : &sessions_.at(it->second);
}

StreamRef Broker::ref_for(const Session& s, const StreamName& name) const {
  auto it = s.streams.find(name);
  return it != s.streams.end() ? it->second.ref : StreamRef::raw(name);
}

void Broker::send_line(Session& s, std::string line) {
  if (tap_) tap_(false, s.ep, line);
  s.peer->send(std::move(line));
}

void Broker::on_open(const std::shared_ptr<LinePeer>& peer) {
  EndpointId ep("ep-" + std::to_string(next_id_++));
  auto& s = sessions_.emplace(peer.get(), Session{peer, ep, {}, {}}).first->second;
  by_id_.emplace(ep, peer.get());
  ++counters_.sessions_accepted;
  EventPayload welcome;
  welcome.event = "welcome";
  welcome.endpoint = ep;
  SignalEnvelope env;
  env.from = EndpointId("broker");
  env.to = ep;
  env.kind = MessageKind::event;
  env.seq = s.seq.next(std::nullopt);
  env.payload = welcome.dump();
  send_line(s, encode(env));
}

void Broker::on_close(const std::shared_ptr<LinePeer>& peer) {
  auto it = sessions_.find(peer.get());
  if (it == sessions_.end()) return;
  std::vector<StreamName> names;
  for (const auto& [name, _] : it->second.streams) names.push_back(name);
  for (const auto& name : names) leave(it->second, name);
  by_id_.erase(it->second.ep);
  sessions_.erase(it);
}

void Broker::on_line(const std::shared_ptr<LinePeer>& peer, std::string_view line) {
  auto it = sessions_.find(peer.get());
  if (it == sessions_.end()) return;
  auto& s = it->second;
  if (tap_) tap_(true, s.ep, line);
  ++counters_.envelopes_in;
  SignalEnvelope env;
  try {
    env = decode(line);
  } catch (const Error& err) {
    ++counters_.malformed;
    send_error(s, std::nullopt, err);
    return;
  }
  try {
    handle(s, env);
  } catch (const Error& err) {
    send_error(s, env.stream, err);
  }
}

void Broker::send_error(Session& s, const std::optional<StreamRef>& stream, const Error& err) {
  ++counters_.errors_sent;
  SignalEnvelope env;
  env.stream = stream;
  env.from = EndpointId("broker");
  env.to = s.ep;
  env.kind = MessageKind::error;
  env.seq = s.seq.next(stream);
  env.payload = ErrorPayload{err.code(), err.what()}.dump();
  send_line(s, encode(env));
}

void Broker::send_event(const EndpointId& to, const StreamName& name, const std::string& event,
                        const std::optional<EndpointId>& peer) {
  auto* s = session(to);
  if (s == nullptr) return;
  EventPayload ev;
  ev.event = event;
  ev.peer = peer;
  SignalEnvelope env;
  env.stream = ref_for(*s, name);
  env.from = EndpointId("broker");
  env.to = to;
  env.kind = MessageKind::event;
  env.seq = s->seq.next(env.stream);
  env.payload = ev.dump();
  send_line(*s, encode(env));
}

void Broker::fire_webhook(const std::string& event, const Membership& m, const EndpointId& ep) {
  if (webhooks_ == nullptr || m.ping.empty()) return;
  auto unix_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count();
  webhooks_->deliver(WebhookEvent{event, m.ref.str(), ep.str(), unix_ms}, m.ping);
}

void Broker::handle(Session& s, const SignalEnvelope& env) {
  if (env.from != s.ep) throw Error(Errc::validation, "from does not match the connection");
  if (!env.stream) throw Error(Errc::validation, "the broker takes no session-scope messages");
  switch (env.kind) {
    case MessageKind::publish: return join(s, env, Side::publisher);
    case MessageKind::subscribe: return join(s, env, Side::subscriber);
    case MessageKind::stop: {
      auto name = registry_.resolve(*env.stream);
      if (name && s.streams.contains(*name)) leave(s, *name);
      return;
    }
    default: return relay(s, env);
  }
}

void Broker::join(Session& s, const SignalEnvelope& env, Side side) {
  const auto& ref = *env.stream;
  auto now = sched_.now();
  std::optional<StreamName> name;
  if (!ref.is_hashed()) {
    if (side == Side::subscriber && options_.hashed_only)
      throw Error(Errc::unauthorized, "this broker only accepts hashed subscriptions");
    name = ref.name();
  } else if (side == Side::subscriber) {
    name = registry_.resolve(ref);
    if (!name) throw Error(Errc::stream_unknown, "no stream for " + ref.str());
  } else {
    throw Error(Errc::validation, "publish needs the raw stream name");
  }

  auto join = JoinPayload::parse(env.payload);
  if (auto it = s.streams.find(*name); it != s.streams.end() && it->second.side != side)
    throw Error(Errc::role, "one connection holds one role per stream");

  StreamRecord rec = registry_.ensure(*name, now);
  if (side == Side::publisher) {
    if (rec.publisher && *rec.publisher != s.ep)
      throw Error(Errc::publisher_conflict, "stream " + ref.str() + " already has a publisher");
    rec = set_tracks(attach_publisher(std::move(rec), s.ep), join.tracks);
  } else {
    rec = attach_subscriber(std::move(rec), s.ep);
  }
  registry_.store(rec, now);
  Membership m{side, ref, parse_webhook_targets(join.ping)};
  s.streams.insert_or_assign(*name, m);

  if (side == Side::publisher) {
    send_event(s.ep, *name, "published", std::nullopt);
    for (const auto& sub : rec.subscribers) {
      send_event(sub, *name, "publisher", s.ep);
      send_event(s.ep, *name, "subscriber", sub);
    }
    fire_webhook("publish", m, s.ep);
  } else {
    send_event(s.ep, *name, "subscribed", std::nullopt);
    if (rec.publisher) {
      send_event(s.ep, *name, "publisher", *rec.publisher);
      send_event(*rec.publisher, *name, "subscriber", s.ep);
    }
    fire_webhook("subscribe", m, s.ep);
  }
}

void Broker::leave(Session& s, const StreamName& name) {
  auto it = s.streams.find(name);
  if (it == s.streams.end()) return;
  auto m = it->second;
  s.streams.erase(it);
  const auto* current = registry_.find(name);
  if (current != nullptr) {
    auto before = *current;
    registry_.store(detach(before, s.ep), sched_.now());
    if (before.publisher == s.ep) {
      for (const auto& sub : before.subscribers) send_event(sub, name, "peer-gone", s.ep);
    } else if (before.publisher) {
      send_event(*before.publisher, name, "peer-gone", s.ep);
    }
  }
  fire_webhook("stop", m, s.ep);
}

void Broker::relay(Session& s, const SignalEnvelope& env) {
  auto name = registry_.resolve(*env.stream);
  if (!name || !s.streams.contains(*name)) throw Error(Errc::membership, "not a member of " + env.stream->str());
  const auto& rec = *registry_.find(*name);
  auto targets = route_rule(env.kind, rec, s.ep, env.to);

  if (env.kind == MessageKind::tracks_added || env.kind == MessageKind::tracks_removed) {
    auto tracks = rec.tracks;
    if (env.kind == MessageKind::tracks_added) {
      for (const auto& t : parse_tracks_added(env.payload)) {
        auto pos = std::find_if(tracks.begin(), tracks.end(), [&](const TrackDescriptor& x) { return x.label == t.label; });
        if (pos == tracks.end()) {
          tracks.push_back(t);
        } else {
          *pos = t;
        }
      }
    } else {
      auto labels = parse_tracks_removed(env.payload);
      std::erase_if(tracks, [&](const TrackDescriptor& t) {
        return std::find(labels.begin(), labels.end(), t.label) != labels.end();
      });
    }
    registry_.store(set_tracks(rec, std::move(tracks)), sched_.now());
  }

  for (const auto& to : targets) {
    auto* target = session(to);
    if (target == nullptr) continue;
    SignalEnvelope out = env;
    out.stream = ref_for(*target, *name);
    send_line(*target, encode(out));
    ++counters_.envelopes_relayed;
  }
}

std::vector<std::string> Broker::audit() const {
  auto problems = registry_.audit();
  for (const auto& [_, s] : sessions_) {
    for (const auto& [name, m] : s.streams) {
      const auto* rec = registry_.find(name);
      bool ok = rec != nullptr && (m.side == Side::publisher ? rec->publisher == s.ep : rec->subscribers.contains(s.ep));
      if (!ok) problems.push_back(s.ep.str() + " missing from " + name.str());
    }
  }
  for (const auto& [name, rec] : registry_.records()) {
    auto check = [&](const EndpointId& ep) {
      auto* owner = const_cast<Broker*>(this)->session(ep);
      if (owner == nullptr || !owner->streams.contains(name))
        problems.push_back(name.str() + " lists unknown member " + ep.str());
    };
    if (rec.publisher) check(*rec.publisher);
    for (const auto& sub : rec.subscribers) check(sub);
  }
  return problems;
}

std::string Broker::snapshot() const {
  nlohmann::ordered_json streams = nlohmann::ordered_json::array();
  for (const auto& [name, rec] : registry_.records()) {
    nlohmann::ordered_json j;
    j["name"] = name.str();
    j["hashed"] = rec.hashed.str();
    j["status"] = std::string(to_string(rec.status));
    j["publisher"] = rec.publisher ? nlohmann::ordered_json(rec.publisher->str()) : nlohmann::ordered_json(nullptr);
    auto subs = nlohmann::ordered_json::array();
    for (const auto& sub : rec.subscribers) subs.push_back(sub.str());
    j["subscribers"] = subs;
    j["tracks"] = tracks_to_json(rec.tracks);
    streams.push_back(j);
  }
  nlohmann::ordered_json out;
  out["sessions"] = sessions_.size();
  out["streams"] = streams;
  return out.dump();
}

}  // namespace nstream
