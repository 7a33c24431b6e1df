#include "nstream/protocol/envelope.hpp"

#include <array>

#include "nstream/error.hpp"

namespace nstream {
namespace {

constexpr std::array<std::pair<MessageKind, std::string_view>, 12> kKinds{{
    {MessageKind::publish, "PUBLISH"},
    {MessageKind::subscribe, "SUBSCRIBE"},
    {MessageKind::stop, "STOP"},
    {MessageKind::offer, "OFFER"},
    {MessageKind::answer, "ANSWER"},
    {MessageKind::candidate, "CANDIDATE"},
    {MessageKind::tracks_added, "TRACKS_ADDED"},
    {MessageKind::tracks_removed, "TRACKS_REMOVED"},
    {MessageKind::text, "TEXT"},
    {MessageKind::pause_hint, "PAUSE_HINT"},
    {MessageKind::event, "EVENT"},
    {MessageKind::error, "ERROR"},
}};

}  // namespace

std::string_view to_string(MessageKind kind) noexcept {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "EVENT";
}

MessageKind message_kind_from_string(std::string_view text) {
  for (const auto& [k, name] : kKinds) {
    if (name == text) return k;
  }
  throw Error(Errc::kind, "unknown message kind: " + std::string(text));
}

bool SeqFilter::accept(const SignalEnvelope& env) {
  auto key = std::make_pair(env.from.str(), env.stream_text());
  auto it = last_.find(key);
  if (it != last_.end() && env.seq <= it->second) return false;
  last_[key] = env.seq;
  return true;
}

void SeqFilter::forget(const EndpointId& from) {
  for (auto it = last_.begin(); it != last_.end();) {
    if (it->first.first == from.str()) {
      it = last_.erase(it);
    } else {
      ++it;
    }
  }
}

std::uint64_t SeqCounter::next(const std::optional<StreamRef>& stream) {
  auto key = stream ? stream->str() : std::string(SignalEnvelope::kSessionScope);
  return ++next_[key];
}

}  // namespace nstream
