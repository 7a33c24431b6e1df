#include "nstream/connectors/storage.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "nstream/engine/address.hpp"
#include "nstream/protocol/payloads.hpp"

namespace nstream {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool has_prefix(const std::string& path, const std::string& prefix) { return path.compare(0, prefix.size(), prefix) == 0; }

std::string last_segment(const std::string& path) { return path.substr(path.rfind('/') + 1); }

}  // namespace

std::string encode_segment(const std::string& name) {
  std::string out;
  for (char c : name) {
    if (c == '/') {
      out += "%2F";
    } else if (c == '%') {
      out += "%25";
    } else {
      out += c;
    }
  }
  return out;
}

// --- MemoryStorage ------------------------------------------------------------

MemoryStorage::MemoryStorage(Scheduler& sched) : MemoryStorage(sched, Options{}) {}

MemoryStorage::MemoryStorage(Scheduler& sched, Options options)
    : sched_(sched), options_(options), rng_(options.seed) {}

void MemoryStorage::notify(const Change& change) {
  for (const auto& [token, w] : watchers_) {
    if (!has_prefix(change.path, w.first)) continue;
    int copies = 1;
    if (options_.duplicate_rate > 0.0 && std::bernoulli_distribution(options_.duplicate_rate)(rng_)) {
      copies = 2;
      ++duplicates_;
    }
    for (int i = 0; i < copies; ++i) {
      sched_.post_after(options_.latency, [this, token = token, change] {
        auto it = watchers_.find(token);
        if (it != watchers_.end()) it->second.second(change);
      });
    }
  }
}

void MemoryStorage::put(const std::string& path, const std::string& value) {
  data_[path] = value;
  notify({path, value});
}

bool MemoryStorage::put_if_absent(const std::string& path, const std::string& value) {
  if (data_.contains(path)) return false;
  put(path, value);
  return true;
}

std::optional<std::string> MemoryStorage::get(const std::string& path) {
  auto it = data_.find(path);
  if (it == data_.end()) return std::nullopt;
  return it->second;
}

void MemoryStorage::remove(const std::string& path) {
  if (data_.erase(path) != 0) notify({path, std::nullopt});
}

std::vector<std::pair<std::string, std::string>> MemoryStorage::list(const std::string& prefix) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto it = data_.lower_bound(prefix); it != data_.end() && has_prefix(it->first, prefix); ++it)
    out.emplace_back(it->first, it->second);
  return out;
}

int MemoryStorage::watch(const std::string& prefix, WatchFn fn) {
  auto token = next_token_++;
  watchers_.emplace(token, std::make_pair(prefix, std::move(fn)));
  return token;
}

void MemoryStorage::unwatch(int token) { watchers_.erase(token); }

// --- FileStorage --------------------------------------------------------------

FileStorage::FileStorage(Scheduler& sched, fs::path root, Millis poll)
    : sched_(sched), root_(std::move(root)), interval_(poll) {
  fs::create_directories(root_);
}

FileStorage::~FileStorage() {
  *alive_ = false;
  if (timer_ != 0) sched_.cancel(timer_);
}

fs::path FileStorage::file_for(const std::string& path) const {
  if (path.empty() || path.front() != '/' || path.find("..") != std::string::npos)
    throw Error(Errc::validation, "bad storage path " + path);
  return root_ / path.substr(1);
}

namespace {

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_beside(const fs::path& file) {
  static std::mt19937_64 rng{std::random_device{}()};
  return file.parent_path() / (".tmp-" + std::to_string(rng()));
}

void write_temp(const fs::path& tmp, const std::string& value) {
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  out << value;
  if (!out) throw Error(Errc::transport, "cannot write " + tmp.string());
}

}  // namespace

void FileStorage::put(const std::string& path, const std::string& value) {
  auto file = file_for(path);
  fs::create_directories(file.parent_path());
  auto tmp = temp_beside(file);
  write_temp(tmp, value);
  fs::rename(tmp, file);
}

bool FileStorage::put_if_absent(const std::string& path, const std::string& value) {
  auto file = file_for(path);
  fs::create_directories(file.parent_path());
  auto tmp = temp_beside(file);
  write_temp(tmp, value);
  std::error_code ec;
  fs::create_hard_link(tmp, file, ec);
  fs::remove(tmp);
  return !ec;
}

std::optional<std::string> FileStorage::get(const std::string& path) {
  auto file = file_for(path);
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) return std::nullopt;
  return read_file(file);
}

void FileStorage::remove(const std::string& path) {
  std::error_code ec;
  fs::remove(file_for(path), ec);
}

std::vector<std::pair<std::string, std::string>> FileStorage::list(const std::string& prefix) {
  std::vector<std::pair<std::string, std::string>> out;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(root_, ec); !ec && it != fs::recursive_directory_iterator();
       it.increment(ec)) {
    if (!it->is_regular_file(ec)) continue;
    if (it->path().filename().string().rfind(".tmp-", 0) == 0) continue;
    auto rel = "/" + fs::relative(it->path(), root_).generic_string();
    if (!has_prefix(rel, prefix)) continue;
    out.emplace_back(rel, read_file(it->path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

int FileStorage::watch(const std::string& prefix, WatchFn fn) {
  auto token = next_token_++;
  Watcher w{prefix, std::move(fn), {}};
  for (auto& [path, value] : list(prefix)) w.seen.emplace(path, value);
  watchers_.emplace(token, std::move(w));
  if (timer_ == 0) {
    auto alive = alive_;
    timer_ = sched_.post_after(interval_, [this, alive] {
      if (*alive) poll();
    });
  }
  return token;
}

void FileStorage::unwatch(int token) { watchers_.erase(token); }

void FileStorage::poll() {
  timer_ = 0;
  std::vector<int> tokens;
  for (const auto& [token, _] : watchers_) tokens.push_back(token);
  for (int token : tokens) {
    auto it = watchers_.find(token);
    if (it == watchers_.end()) continue;
    std::map<std::string, std::string> now;
    for (auto& [path, value] : list(it->second.prefix)) now.emplace(path, value);
    std::vector<Change> changes;
    for (const auto& [path, value] : now) {
      auto old = it->second.seen.find(path);
      if (old == it->second.seen.end() || old->second != value) changes.push_back({path, value});
    }
    for (const auto& [path, _] : it->second.seen)
      if (!now.contains(path)) changes.push_back({path, std::nullopt});
    it->second.seen = std::move(now);
    auto fn = it->second.fn;
    for (const auto& c : changes) {
      if (!watchers_.contains(token)) break;
      fn(c);
    }
  }
  if (!watchers_.empty() && timer_ == 0) {
    auto alive = alive_;
    timer_ = sched_.post_after(interval_, [this, alive] {
      if (*alive) poll();
    });
  }
}

// --- StorageConnector ---------------------------------------------------------

StorageConnector::StorageConnector(StorageApi& storage, std::string instance)
    : storage_(storage), instance_(std::move(instance)) {}

StorageConnector::~StorageConnector() {
  for (auto& [_, a] : attached_)
    for (int w : a->watches) storage_.unwatch(w);
}

StorageConnector::Attachment* StorageConnector::find(const EndpointSession& session) {
  auto it = attached_.find(&session);
  return it == attached_.end() ? nullptr : it->second.get();
}

void StorageConnector::write_publisher(Attachment& a) {
  json v{{"endpoint", a.ep.str()}, {"tracks", tracks_to_json(a.session->tracks())}};
  storage_.put(a.base + "/publisher", v.dump());
}

void StorageConnector::publish(EndpointSession& session) {
  stop(session);
  auto& sched = session.scheduler();
  const auto& ref = session.address().stream;
  if (ref.is_hashed()) {
    sched.post([this, &session] { report_error(session, Error(Errc::validation, "publish needs the raw stream name")); });
    return;
  }
  auto a = std::make_unique<Attachment>();
  a->session = &session;
  a->role = Role::publisher;
  a->ep = EndpointId(instance_ + "-" + session.uid() + "-" + std::to_string(next_id_++));
  a->base = "/streams/" + encode_segment(ref.str());

  json v{{"endpoint", a->ep.str()}, {"tracks", tracks_to_json(session.tracks())}};
  if (!storage_.put_if_absent(a->base + "/publisher", v.dump())) {
    sched.post([this, &session, ref] {
      report_error(session, Error(Errc::publisher_conflict, "stream " + ref.str() + " already has a publisher"));
    });
    return;
  }
  storage_.put("/hashes/" + hash_name(ref.name()).str().substr(StreamRef::kHashPrefix.size()), ref.str());

  auto* raw = a.get();
  raw->watches.push_back(storage_.watch(raw->base + "/subscribers/", [this, raw](const StorageApi::Change& c) {
    on_subscriber_change(*raw, c);
  }));
  raw->watches.push_back(storage_.watch(raw->base + "/msgs/" + encode_segment(raw->ep.str()) + "/",
                                        [this, raw](const StorageApi::Change& c) { on_message(*raw, c); }));
  auto existing = storage_.list(raw->base + "/subscribers/");
  attached_[&session] = std::move(a);
  sched.post([this, &session, existing] {
    auto* a = find(session);
    if (a == nullptr) return;
    for (const auto& [path, value] : existing) on_subscriber_change(*a, {path, value});
  });
}

void StorageConnector::subscribe(EndpointSession& session) {
  stop(session);
  auto& sched = session.scheduler();
  const auto& ref = session.address().stream;
  std::string name;
  if (ref.is_hashed()) {
    auto found = storage_.get("/hashes/" + ref.str().substr(StreamRef::kHashPrefix.size()));
    if (!found) {
      sched.post([this, &session, ref] { report_error(session, Error(Errc::stream_unknown, "no stream for " + ref.str())); });
      return;
    }
    name = *found;
  } else {
    name = ref.str();
  }
  auto a = std::make_unique<Attachment>();
  a->session = &session;
  a->role = Role::subscriber;
  a->ep = EndpointId(instance_ + "-" + session.uid() + "-" + std::to_string(next_id_++));
  a->base = "/streams/" + encode_segment(name);

  auto* raw = a.get();
  raw->watches.push_back(storage_.watch(raw->base + "/publisher", [this, raw](const StorageApi::Change& c) {
    on_publisher_change(*raw, c);
  }));
  raw->watches.push_back(storage_.watch(raw->base + "/msgs/" + encode_segment(raw->ep.str()) + "/",
                                        [this, raw](const StorageApi::Change& c) { on_message(*raw, c); }));
  storage_.put(raw->base + "/subscribers/" + encode_segment(raw->ep.str()), "{}");
  auto current = storage_.get(raw->base + "/publisher");
  attached_[&session] = std::move(a);
  if (current) {
    sched.post([this, &session, current] {
      auto* a = find(session);
      if (a != nullptr) on_publisher_change(*a, {a->base + "/publisher", current});
    });
  }
}

void StorageConnector::stop(EndpointSession& session) {
  auto it = attached_.find(&session);
  if (it == attached_.end()) return;
  auto& a = *it->second;
  for (int w : a.watches) storage_.unwatch(w);
  if (a.role == Role::publisher) {
    auto current = storage_.get(a.base + "/publisher");
    if (current && json::parse(*current).value("endpoint", "") == a.ep.str()) storage_.remove(a.base + "/publisher");
  } else {
    storage_.remove(a.base + "/subscribers/" + encode_segment(a.ep.str()));
  }
  attached_.erase(it);
}

void StorageConnector::add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& /*tracks*/) {
  if (auto* a = find(session); a != nullptr && a->role == Role::publisher) write_publisher(*a);
}

void StorageConnector::remove_tracks(EndpointSession& session, const std::vector<std::string>& /*labels*/) {
  if (auto* a = find(session); a != nullptr && a->role == Role::publisher) write_publisher(*a);
}

void StorageConnector::relay(EndpointSession& session, const PeerLink& link, MessageKind kind, std::string payload) {
  auto* a = find(session);
  if (a == nullptr) return;
  std::ostringstream name;
  name << encode_segment(a->ep.str()) << '.' << std::setw(12) << std::setfill('0') << a->next_seq++;
  json v{{"kind", std::string(to_string(kind))}, {"payload", std::move(payload)}};
  storage_.put(a->base + "/msgs/" + encode_segment(link.counterpart.str()) + "/" + name.str(), v.dump());
}

void StorageConnector::on_publisher_change(Attachment& a, const StorageApi::Change& change) {
  auto& session = *a.session;
  if (!change.value) {
    if (a.publisher) {
      auto gone = *a.publisher;
      a.publisher.reset();
      a.remote_tracks.clear();
      session.peer_left(gone);
    }
    return;
  }
  json v;
  try {
    v = json::parse(*change.value);
  } catch (const json::exception&) {
    session.record("error", "validation");
    return;
  }
  EndpointId ep(v.value("endpoint", "-"));
  auto tracks = tracks_from_json(v.value("tracks", json::array()));
  if (a.publisher == ep) {
    std::vector<std::string> removed;
    for (const auto& t : a.remote_tracks) {
      if (std::none_of(tracks.begin(), tracks.end(), [&](const TrackDescriptor& n) { return n.label == t.label; }))
        removed.push_back(t.label);
    }
    std::vector<TrackDescriptor> changed;
    for (const auto& t : tracks) {
      if (std::find(a.remote_tracks.begin(), a.remote_tracks.end(), t) == a.remote_tracks.end()) changed.push_back(t);
    }
    a.remote_tracks = tracks;
    if (!removed.empty()) session.remote_tracks_removed(removed);
    if (!changed.empty()) session.remote_tracks_added(changed);
    if (removed.empty() && changed.empty()) ++duplicates_ignored_;
    return;
  }
  if (a.publisher) session.peer_left(*a.publisher);
  a.publisher = ep;
  a.remote_tracks = tracks;
  session.publisher_available(ep);
}

void StorageConnector::on_subscriber_change(Attachment& a, const StorageApi::Change& change) {
  EndpointId ep(percent_decode(last_segment(change.path)));
  if (change.value) {
    if (a.subscribers.insert(ep).second) {
      a.session->peer_joined(ep, *this);
    } else {
      ++duplicates_ignored_;
    }
  } else if (a.subscribers.erase(ep) != 0) {
    a.session->peer_left(ep);
  }
}

void StorageConnector::on_message(Attachment& a, const StorageApi::Change& change) {
  if (!change.value) return;
  auto leaf = last_segment(change.path);
  auto dot = leaf.rfind('.');
  if (dot == std::string::npos) return;
  auto from = percent_decode(leaf.substr(0, dot));
  std::uint64_t seq = std::stoull(leaf.substr(dot + 1));
  if (!a.seen.emplace(from, seq).second) {
    ++duplicates_ignored_;
    return;
  }
  auto& session = *a.session;
  try {
    auto v = json::parse(*change.value);
    session.apply(v.at("payload").get<std::string>(), EndpointId(from), this);
  } catch (const json::exception&) {
    session.record("error", "validation");
  } catch (const Error& e) {
    session.record("error", std::string(to_string(e.code())));
  }
  if (find(session) == &a) storage_.remove(change.path);
}

}  // namespace nstream
