#include "nstream/protocol/routing.hpp"

#include "nstream/error.hpp"

namespace nstream {
namespace {

std::vector<EndpointId> subscribers_except(const StreamRecord& rec, const EndpointId& from) {
  std::vector<EndpointId> out;
  for (const auto& s : rec.subscribers) {
    if (s != from) out.push_back(s);
  }
  return out;
}

bool is_pair(const StreamRecord& rec, const EndpointId& a, const EndpointId& b) {
  return (rec.publisher == a && rec.subscribers.contains(b)) || (rec.publisher == b && rec.subscribers.contains(a));
}

}  // namespace

std::vector<EndpointId> route_rule(MessageKind kind, const StreamRecord& rec, const EndpointId& from,
                                   const std::optional<EndpointId>& to) {
  switch (kind) {
    case MessageKind::publish:
    case MessageKind::subscribe:
    case MessageKind::stop:
      return {};

    case MessageKind::offer:
    case MessageKind::answer:
    case MessageKind::candidate:
      if (!rec.is_member(from)) throw Error(Errc::membership, "sender is not a member of the stream");
      if (!to || *to == from) throw Error(Errc::validation, std::string(to_string(kind)) + " needs a counterpart 'to'");
      if (!is_pair(rec, from, *to)) throw Error(Errc::membership, "recipient is not a counterpart of the sender");
      return {*to};

    case MessageKind::tracks_added:
    case MessageKind::tracks_removed:
    case MessageKind::pause_hint:
      if (rec.publisher != from) throw Error(Errc::role, std::string(to_string(kind)) + " is publisher-only");
      return subscribers_except(rec, from);

    case MessageKind::text:
    case MessageKind::event:
    case MessageKind::error:
      if (rec.publisher == from) {
        if (to) {
          if (!rec.subscribers.contains(*to) || *to == from)
            throw Error(Errc::membership, "recipient is not a subscriber");
          return {*to};
        }
        return subscribers_except(rec, from);
      }
      if (!rec.subscribers.contains(from)) throw Error(Errc::membership, "sender is not a member of the stream");
      if (rec.publisher && *rec.publisher != from) return {*rec.publisher};
      return {};
  }
  return {};
}

}  // namespace nstream
