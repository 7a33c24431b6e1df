#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "nstream/engine/connector.hpp"
#include "nstream/engine/session.hpp"
#include "nstream/runtime/scheduler.hpp"

namespace nstream {

/// Hierarchical key-value store with change notification.
///
/// Paths look like `/a/b/c`. watch(prefix) reports every later change
/// under the prefix at least once, in order per path; a removal is a
/// change whose value is nullopt. Notifications arrive on the scheduler
/// the backend was built with.
class StorageApi {
 public:
  struct Change {
    std::string path;
    std::optional<std::string> value;
  };
  using WatchFn = std::function<void(const Change&)>;

  virtual ~StorageApi() = default;

  virtual void put(const std::string& path, const std::string& value) = 0;
  /// Atomic create; false when the path already exists.
  virtual bool put_if_absent(const std::string& path, const std::string& value) = 0;
  virtual std::optional<std::string> get(const std::string& path) = 0;
  virtual void remove(const std::string& path) = 0;
  /// Current entries under `prefix`, sorted by path.
  virtual std::vector<std::pair<std::string, std::string>> list(const std::string& prefix) = 0;
  virtual int watch(const std::string& prefix, WatchFn fn) = 0;
  virtual void unwatch(int token) = 0;
};

/// In-process backend. Notifications are posted after `latency`; with
/// duplicate_rate > 0 some are delivered twice to exercise dedup.
class MemoryStorage final : public StorageApi {
 public:
  struct Options {
    Millis latency{2};
    double duplicate_rate = 0.0;
    std::uint64_t seed = 1;
  };

  explicit MemoryStorage(Scheduler& sched);
  MemoryStorage(Scheduler& sched, Options options);

  void put(const std::string& path, const std::string& value) override;
  bool put_if_absent(const std::string& path, const std::string& value) override;
  std::optional<std::string> get(const std::string& path) override;
  void remove(const std::string& path) override;
  std::vector<std::pair<std::string, std::string>> list(const std::string& prefix) override;
  int watch(const std::string& prefix, WatchFn fn) override;
  void unwatch(int token) override;

  std::size_t duplicates_sent() const noexcept { return duplicates_; }

 private:
  void notify(const Change& change);

  Scheduler& sched_;
  Options options_;
  std::mt19937_64 rng_;
  std::map<std::string, std::string> data_;
  std::map<int, std::pair<std::string, WatchFn>> watchers_;
  int next_token_ = 1;
  std::size_t duplicates_ = 0;
};

/// One file per path below `root`, change detection by polling.
/// Several processes may share a root.
class FileStorage final : public StorageApi {
 public:
  static constexpr Millis kDefaultPoll{50};

  FileStorage(Scheduler& sched, std::filesystem::path root, Millis poll = kDefaultPoll);
  ~FileStorage() override;

  void put(const std::string& path, const std::string& value) override;
  bool put_if_absent(const std::string& path, const std::string& value) override;
  std::optional<std::string> get(const std::string& path) override;
  void remove(const std::string& path) override;
  std::vector<std::pair<std::string, std::string>> list(const std::string& prefix) override;
  int watch(const std::string& prefix, WatchFn fn) override;
  void unwatch(int token) override;

 private:
  struct Watcher {
    std::string prefix;
    WatchFn fn;
    std::map<std::string, std::string> seen;
  };

  std::filesystem::path file_for(const std::string& path) const;
  void poll();

  Scheduler& sched_;
  std::filesystem::path root_;
  Millis interval_;
  std::map<int, Watcher> watchers_;
  int next_token_ = 1;
  Scheduler::TimerId timer_ = 0;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

/// Stream name as a single path segment: `/` and `%` are percent-encoded.
std::string encode_segment(const std::string& name);

/// Named stream over shared storage. Layout per stream `<n>`:
///   /streams/<n>/publisher            {"endpoint","tracks"}
///   /streams/<n>/subscribers/<ep>     {}
///   /streams/<n>/msgs/<to>/<from>.<seq>  {"kind","payload"}
///   /hashes/<hex>                     raw name, for hashed subscribers
/// Sessions find each other through watches; peer links form a mesh.
class StorageConnector final : public Connector {
 public:
  explicit StorageConnector(StorageApi& storage, std::string instance = "st");
  ~StorageConnector() override;

  std::string_view scheme() const override { return "storage"; }
  void publish(EndpointSession& session) override;
  void subscribe(EndpointSession& session) override;
  void stop(EndpointSession& session) override;
  void add_tracks(EndpointSession& session, const std::vector<TrackDescriptor>& tracks) override;
  void remove_tracks(EndpointSession& session, const std::vector<std::string>& labels) override;
  void relay(EndpointSession& session, const PeerLink& link, MessageKind kind, std::string payload) override;

  std::size_t duplicates_ignored() const noexcept { return duplicates_ignored_; }

 private:
  struct Attachment {
    EndpointSession* session = nullptr;
    Role role = Role::unset;
    EndpointId ep{"-"};
    std::string base;
    std::vector<int> watches;
    std::optional<EndpointId> publisher;
    std::vector<TrackDescriptor> remote_tracks;
    std::set<EndpointId> subscribers;
    std::set<std::pair<std::string, std::uint64_t>> seen;
    std::uint64_t next_seq = 1;
  };

  void on_publisher_change(Attachment& a, const StorageApi::Change& change);
  void on_subscriber_change(Attachment& a, const StorageApi::Change& change);
  void on_message(Attachment& a, const StorageApi::Change& change);
  void write_publisher(Attachment& a);
  Attachment* find(const EndpointSession& session);

  StorageApi& storage_;
  std::string instance_;
  std::uint64_t next_id_ = 1;
  std::map<const EndpointSession*, std::unique_ptr<Attachment>> attached_;
  std::size_t duplicates_ignored_ = 0;
};

}  // namespace nstream
