#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "nstream/core/types.hpp"

namespace nstream {

enum class MessageKind {
  publish,
  subscribe,
  stop,
  offer,
  answer,
  candidate,
  tracks_added,
  tracks_removed,
  text,
  pause_hint,
  event,
  error,
};

/// Wire spelling, e.g. "TRACKS_ADDED".
std::string_view to_string(MessageKind kind) noexcept;
/// Throws Errc::kind for anything outside the closed set.
MessageKind message_kind_from_string(std::string_view text);

/// The one message shape every connector and the broker relay.
///
/// `stream` is nullopt for session-scope messages, written as `*` on the
/// wire. `to` absent means the broker routes by kind.
struct SignalEnvelope {
  static constexpr int kVersion = 1;
  static constexpr std::size_t kMaxPayload = 64 * 1024;
  static constexpr std::string_view kSessionScope = "*";

  std::optional<StreamRef> stream;
  EndpointId from{"-"};
  std::optional<EndpointId> to;
  MessageKind kind = MessageKind::event;
  std::uint64_t seq = 0;
  std::string payload;

  std::string stream_text() const { return stream ? stream->str() : std::string(kSessionScope); }
  bool operator==(const SignalEnvelope&) const = default;
};

/// Drops replays: an envelope is accepted only if its seq is higher than
/// anything seen before from the same sender on the same stream. Gaps pass.
class SeqFilter {
 public:
  bool accept(const SignalEnvelope& env);
  void forget(const EndpointId& from);
  void clear() { last_.clear(); }

 private:
  std::map<std::pair<std::string, std::string>, std::uint64_t> last_;
};

/// Per-stream outbound sequence counter for one sender.
class SeqCounter {
 public:
  std::uint64_t next(const std::optional<StreamRef>& stream);

 private:
  std::map<std::string, std::uint64_t> next_;
};

}  // namespace nstream
