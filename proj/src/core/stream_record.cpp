#include "nstream/core/stream_record.hpp"

#include "nstream/error.hpp"

namespace nstream {

std::string_view to_string(StreamStatus status) noexcept {
  return status == StreamStatus::live ? "live" : "idle";
}

StreamRecord::StreamRecord(StreamName n) : name(n), hashed(hash_name(n)) {}

bool StreamRecord::is_member(const EndpointId& ep) const {
  return publisher == ep || subscribers.contains(ep);
}

StreamRecord attach_publisher(StreamRecord rec, const EndpointId& ep) {
  if (rec.publisher) {
    if (*rec.publisher == ep) return rec;
    throw Error(Errc::publisher_conflict, "stream already has a publisher");
  }
  rec.publisher = ep;
  rec.status = StreamStatus::live;
  return rec;
}

StreamRecord attach_subscriber(StreamRecord rec, const EndpointId& ep) {
  rec.subscribers.insert(ep);
  return rec;
}

StreamRecord detach(StreamRecord rec, const EndpointId& ep) {
  if (rec.publisher == ep) {
    rec.publisher.reset();
    rec.status = StreamStatus::idle;
    rec.tracks.clear();
  }
  rec.subscribers.erase(ep);
  return rec;
}

StreamRecord set_tracks(StreamRecord rec, std::vector<TrackDescriptor> tracks) {
  if (!rec.publisher) throw Error(Errc::role, "tracks require a publisher");
  require_unique_labels(tracks);
  rec.tracks = std::move(tracks);
  return rec;
}

void check_invariants(const StreamRecord& rec) {
  if ((rec.status == StreamStatus::live) != rec.publisher.has_value())
    throw Error(Errc::state, "status/publisher mismatch on " + rec.name.str());
  if (!rec.publisher && !rec.tracks.empty()) throw Error(Errc::state, "tracks without publisher on " + rec.name.str());
  require_unique_labels(rec.tracks);
}

const StreamRecord& StreamRegistry::ensure(const StreamName& name, Clock now) {
  auto it = records_.find(name);
  if (it != records_.end()) return it->second;
  auto [pos, _] = records_.emplace(name, StreamRecord(name));
  empty_since_[name] = now;
  rebuild_index();
  return pos->second;
}

const StreamRecord* StreamRegistry::find(const StreamName& name) const {
  auto it = records_.find(name);
  return it == records_.end() ? nullptr : &it->second;
}

std::optional<StreamName> StreamRegistry::resolve(const StreamRef& ref) const {
  if (ref.is_hashed()) {
    auto it = hash_index_.find(ref.str());
    if (it == hash_index_.end()) return std::nullopt;
    return it->second;
  }
  auto name = ref.name();
  if (!records_.contains(name)) return std::nullopt;
  return name;
}

void StreamRegistry::store(StreamRecord rec, Clock now) {
  check_invariants(rec);
  auto name = rec.name;
  bool created = !records_.contains(name);
  if (rec.empty()) {
    empty_since_.try_emplace(name, now);
  } else {
    empty_since_.erase(name);
  }
  records_.insert_or_assign(name, std::move(rec));
  if (created) rebuild_index();
}

std::size_t StreamRegistry::collect_idle(Clock now, Clock grace) {
  std::size_t removed = 0;
  for (auto it = empty_since_.begin(); it != empty_since_.end();) {
    if (now - it->second >= grace) {
      records_.erase(it->first);
      it = empty_since_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  if (removed > 0) rebuild_index();
  return removed;
}

std::vector<std::string> StreamRegistry::audit() const {
  std::vector<std::string> problems;
  for (const auto& [name, rec] : records_) {
    try {
      check_invariants(rec);
    } catch (const Error& e) {
      problems.emplace_back(e.what());
    }
    auto it = hash_index_.find(rec.hashed.str());
    if (it == hash_index_.end() || it->second != name) problems.push_back("hash index missing " + name.str());
    if (rec.empty() != empty_since_.contains(name)) problems.push_back("idle tracking out of sync for " + name.str());
  }
  if (hash_index_.size() != records_.size()) problems.emplace_back("hash index size mismatch");
  return problems;
}

void StreamRegistry::rebuild_index() {
  hash_index_.clear();
  for (const auto& [name, rec] : records_) hash_index_.emplace(rec.hashed.str(), name);
}

}  // namespace nstream
