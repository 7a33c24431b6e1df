#include "nstream/connectors/broker_connector.hpp"

#include "nstream/protocol/codec.hpp"
#include "nstream/protocol/payloads.hpp"

namespace nstream {

struct BrokerConnector::Attachment {
  EndpointSession* session = nullptr;
  Role role = Role::unset;
  std::string origin;
  std::unique_ptr<ClientTransport> transport;
  std::optional<EndpointId> ep;
  SeqCounter seq;
  int failures = 0;
  bool stopped = false;
  Scheduler::TimerId retry = 0;
};

BrokerConnector::BrokerConnector(TransportFactory factory, std::string origin, std::string token)
    : factory_(std::move(factory)), origin_(std::move(origin)), token_(std::move(token)) {}

BrokerConnector::~BrokerConnector() {
  for (auto& [_, a] : attached_) {
    a->stopped = true;
    if (a->retry != 0) a->session->scheduler().cancel(a->retry);
    if (a->transport) a->transport->close();
  }
}

std::optional<EndpointId> BrokerConnector::endpoint_of(const EndpointSession& session) const {
  auto it = attached_.find(&session);
  if (it == attached_.end()) return std::nullopt;
  return it->second->ep;
}

void BrokerConnector::publish(EndpointSession& session) { join(session, Role::publisher); }
void BrokerConnector::subscribe(EndpointSession& session) { join(session, Role::subscriber); }

void BrokerConnector::join(EndpointSession& session, Role role) {
  stop(session);
  auto a = std::make_shared<Attachment>();
  a->session = &session;
  a->role = role;
  a->origin = origin_.empty() ? session.address().origin() : origin_;
  attached_[&session] = a;
  connect(a);
}

void BrokerConnector::connect(const std::shared_ptr<Attachment>& a) {
  a->retry = 0;
  std::string path = "/ws";
  if (!token_.empty()) path += "?token=" + token_;
  a->transport = factory_(a->origin, path);
  std::weak_ptr<Attachment> weak = a;
  a->transport->open({
      [] {},
      [this, weak](std::string line) {
        if (auto a = weak.lock(); a && !a->stopped) on_line(a, line);
      },
      [this, weak](std::string reason) {
        if (auto a = weak.lock(); a && !a->stopped) on_lost(a, reason);
      },
  });
}

void BrokerConnector::send(const std::shared_ptr<Attachment>& a, MessageKind kind, std::string payload,
                           const std::optional<EndpointId>& to, bool session_scope) {
  if (!a->ep || !a->transport) return;
  SignalEnvelope env;
  if (!session_scope) env.stream = a->session->address().stream;
  env.from = *a->ep;
  env.to = to;
  env.kind = kind;
  env.seq = a->seq.next(env.stream);
  env.payload = std::move(payload);
  auto line = encode(env);
  a->session->record("wire-out", line);
  a->transport->send(std::move(line));
}

void BrokerConnector::on_line(const std::shared_ptr<Attachment>& a, const std::string& line) {
  auto& session = *a->session;
  session.record("wire-in", line);
  SignalEnvelope env;
  try {
    env = decode(line);
  } catch (const Error& e) {
    session.record("error", std::string(to_string(e.code())));
    return;
  }

  try {
    switch (env.kind) {
      case MessageKind::event: {
        auto ev = EventPayload::parse(env.payload);
        if (ev.event == "welcome") {
          if (!ev.endpoint) throw Error(Errc::validation, "welcome without endpoint id");
          a->ep = *ev.endpoint;
          a->failures = 0;
          JoinPayload join;
          if (a->role == Role::publisher) join.tracks = session.tracks();
          join.ping = session.ping();
          send(a, a->role == Role::publisher ? MessageKind::publish : MessageKind::subscribe, join.dump());
        } else if (ev.event == "subscriber" && ev.peer) {
          session.peer_joined(*ev.peer, *this);
        } else if (ev.event == "publisher" && ev.peer) {
          session.publisher_available(*ev.peer);
        } else if (ev.event == "peer-gone" && ev.peer) {
          session.peer_left(*ev.peer);
        }
        break;
      }
      case MessageKind::error: {
        auto err = ErrorPayload::parse(env.payload);
        report_error(session, Error(err.code, err.detail));
        break;
      }
      case MessageKind::offer:
      case MessageKind::answer:
      case MessageKind::candidate:
        session.apply(env.payload, env.from, this);
        break;
      case MessageKind::tracks_added:
        session.remote_tracks_added(parse_tracks_added(env.payload));
        break;
      case MessageKind::tracks_removed:
        session.remote_tracks_removed(parse_tracks_removed(env.payload));
        break;
      default:
        break;
    }
  } catch (const Error& e) {
    session.record("error", std::string(to_string(e.code())));
  }
}

void BrokerConnector::on_lost(const std::shared_ptr<Attachment>& a, const std::string& reason) {
  auto& session = *a->session;
  a->transport.reset();
  a->ep.reset();
  session.record("transport-lost", reason);
  session.links_lost(*this);
  if (a->failures >= kReconnectAttempts) {
    attached_.erase(&session);
    report_error(session, Error(Errc::transport, "broker unreachable: " + reason));
    return;
  }
  auto backoff = kFirstBackoff * (1 << a->failures);
  ++a->failures;
  ++reconnects_;
  std::weak_ptr<Attachment> weak = a;
  a->retry = session.scheduler().post_after(backoff, [this, weak] {
    if (auto a = weak.lock(); a && !a->stopped) connect(a);
  });
}

void BrokerConnector::stop(EndpointSession& session) {
  auto it = attached_.find(&session);
  if (it == attached_.end()) return;
  auto a = it->second;
  attached_.erase(it);
  send(a, MessageKind::stop, "");
  a->stopped = true;
  if (a->retry != 0) session.scheduler().cancel(a->retry);
  if (a->transport) a->transport->close();
}

void BrokerConnector::add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) {
  auto it = attached_.find(&session);
  if (it != attached_.end()) send(it->second, MessageKind::tracks_added, tracks_added_payload(tracks));
}

void BrokerConnector::remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) {
  auto it = attached_.find(&session);
  if (it != attached_.end()) send(it->second, MessageKind::tracks_removed, tracks_removed_payload(labels));
}

void BrokerConnector::relay(EndpointSession& session, const PeerLink& link, MessageKind kind, std::string payload) {
  auto it = attached_.find(&session);
  if (it != attached_.end()) send(it->second, kind, std::move(payload), link.counterpart);
}

}  // namespace nstream
