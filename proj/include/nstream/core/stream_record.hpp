#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nstream/core/types.hpp"

namespace nstream {

enum class StreamStatus { idle, live };

std::string_view to_string(StreamStatus status) noexcept;

/// Authoritative state of one named stream.
///
/// status is live exactly when a publisher is attached. Subscribers may be
/// present while idle; they are pending and get linked once a publisher
/// arrives.
struct StreamRecord {
  StreamName name;
  StreamRef hashed;
  std::optional<EndpointId> publisher;
  std::set<EndpointId> subscribers;
  std::vector<TrackDescriptor> tracks;
  StreamStatus status = StreamStatus::idle;

  explicit StreamRecord(StreamName n);

  bool empty() const noexcept { return !publisher && subscribers.empty(); }
  bool is_member(const EndpointId& ep) const;
  bool operator==(const StreamRecord&) const = default;
};

// Pure transitions. Each returns the successor record and leaves the input
// untouched. Callers serialize transitions per record.

/// Throws Errc::publisher_conflict when another endpoint holds the slot.
/// Re-attaching the current publisher is a no-op.
StreamRecord attach_publisher(StreamRecord rec, const EndpointId& ep);
/// Duplicate subscription is an idempotent success.
StreamRecord attach_subscriber(StreamRecord rec, const EndpointId& ep);
/// Removes ep from whichever role it holds. Losing the publisher clears the
/// track list and leaves subscribers pending. Unknown ep is a no-op.
StreamRecord detach(StreamRecord rec, const EndpointId& ep);
/// Replaces the advertised tracks; requires a publisher and unique labels.
StreamRecord set_tracks(StreamRecord rec, std::vector<TrackDescriptor> tracks);

/// Throws Errc::state if the record violates its invariants.
void check_invariants(const StreamRecord& rec);

/// Collection of stream records plus the hashed-name index.
///
/// Records that become empty are kept for an idle grace period and then
/// removed by collect_idle(); the hash index always mirrors the record set.
class StreamRegistry {
 public:
  using Clock = std::chrono::milliseconds;

  /// Returns the record, creating an idle one on demand.
  const StreamRecord& ensure(const StreamName& name, Clock now);
  const StreamRecord* find(const StreamName& name) const;
  /// Raw refs resolve to themselves if the record exists; hashed refs go
  /// through the index. Returns nullopt when nothing matches.
  std::optional<StreamName> resolve(const StreamRef& ref) const;
  /// Stores a successor record produced by one of the transitions.
  void store(StreamRecord rec, Clock now);

  /// Deletes records that have been empty for at least `grace`.
  std::size_t collect_idle(Clock now, Clock grace);

  const std::map<StreamName, StreamRecord>& records() const noexcept { return records_; }
  /// Human-readable invariant violations; empty when consistent.
  std::vector<std::string> audit() const;

 private:
  void rebuild_index();

  std::map<StreamName, StreamRecord> records_;
  std::map<std::string, StreamName> hash_index_;
  std::map<StreamName, Clock> empty_since_;
};

}  // namespace nstream
