#include "nstream/connectors/in_memory.hpp"

#include <algorithm>

namespace nstream {

const EndpointId* InMemoryHub::id_of(const EndpointSession& session) const {
  auto it = ids_.find(&session);
  return it == ids_.end() ? nullptr : &it->second;
}

void InMemoryHub::post_to(const EndpointId& ep, std::function<void(Member&)> fn) {
  sched_.post([this, ep, fn = std::move(fn)] {
    auto it = members_.find(ep);
    if (it != members_.end()) fn(it->second);
  });
}

void InMemoryHub::join(EndpointSession& session, InMemoryConnector& conn, Role role) {
  leave(session);
  auto fail = [this, &session, &conn](Error err) {
    sched_.post([&session, &conn, err] { conn.report_error(session, err); });
  };

  const auto& ref = session.address().stream;
  std::optional<StreamName> name;
  if (!ref.is_hashed()) {
    name = ref.name();
  } else if (role == Role::subscriber) {
    name = registry_.resolve(ref);
    if (!name) return fail(Error(Errc::stream_unknown, "no stream for " + ref.str()));
  } else {
    return fail(Error(Errc::validation, "publish needs the raw stream name"));
  }

  auto now = sched_.now();
  StreamRecord rec = registry_.ensure(*name, now);
  EndpointId ep("mem-" + std::to_string(next_id_++));
  try {
    if (role == Role::publisher) {
      rec = set_tracks(attach_publisher(std::move(rec), ep), session.tracks());
    } else {
      rec = attach_subscriber(std::move(rec), ep);
    }
  } catch (const Error& e) {
    return fail(e);
  }
  registry_.store(rec, now);
  members_.emplace(ep, Member{&session, &conn, *name, role});
  ids_.emplace(&session, ep);

  if (role == Role::publisher) {
    for (const auto& sub : rec.subscribers) {
      post_to(sub, [ep](Member& m) { m.session->publisher_available(ep); });
      post_to(ep, [sub](Member& m) { m.session->peer_joined(sub, *m.connector); });
    }
  } else if (rec.publisher) {
    auto pub = *rec.publisher;
    post_to(ep, [pub](Member& m) { m.session->publisher_available(pub); });
    post_to(pub, [ep](Member& m) { m.session->peer_joined(ep, *m.connector); });
  }
}

void InMemoryHub::leave(EndpointSession& session) {
  const auto* found = id_of(session);
  if (found == nullptr) return;
  EndpointId ep = *found;
  auto member = members_.at(ep);
  members_.erase(ep);
  ids_.erase(&session);

  const auto* current = registry_.find(member.stream);
  if (current == nullptr) return;
  auto before = *current;
  registry_.store(detach(before, ep), sched_.now());
  if (member.role == Role::publisher) {
    for (const auto& sub : before.subscribers) post_to(sub, [ep](Member& m) { m.session->peer_left(ep); });
  } else if (before.publisher) {
    post_to(*before.publisher, [ep](Member& m) { m.session->peer_left(ep); });
  }
}

void InMemoryHub::relay(EndpointSession& session, const PeerLink& link, std::string payload) {
  const auto* from = id_of(session);
  if (from == nullptr) return;
  post_to(link.counterpart, [from = *from, payload = std::move(payload)](Member& m) {
    try {
      m.session->apply(payload, from, m.connector);
    } catch (const Error& e) {
      m.session->record("error", std::string(to_string(e.code())));
    }
  });
}

void InMemoryHub::tracks_changed(EndpointSession& session, const std::vector<TrackDescriptor>* added,
                                 const std::vector<std::string>* removed) {
  const auto* ep = id_of(session);
  if (ep == nullptr) return;
  const auto& member = members_.at(*ep);
  const auto* rec = registry_.find(member.stream);
  if (rec == nullptr || rec->publisher != *ep) return;
  auto subscribers = rec->subscribers;
  registry_.store(set_tracks(*rec, session.tracks()), sched_.now());
  for (const auto& sub : subscribers) {
    if (added != nullptr) {
      post_to(sub, [tracks = *added](Member& m) { m.session->remote_tracks_added(tracks); });
    } else {
      post_to(sub, [labels = *removed](Member& m) { m.session->remote_tracks_removed(labels); });
    }
  }
}

}  // namespace nstream
