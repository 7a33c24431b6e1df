#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <queue>
#include <set>
#include <vector>

namespace nstream {

using Millis = std::chrono::milliseconds;

/// Ordering domain for sessions, connectors and services. Tasks run one at
/// a time in (time, post order).
class Scheduler {
 public:
  using Task = std::function<void()>;
  using TimerId = std::uint64_t;

  virtual ~Scheduler() = default;

  virtual Millis now() const = 0;
  virtual TimerId post_at(Millis when, Task task) = 0;
  virtual void cancel(TimerId id) = 0;

  TimerId post(Task task) { return post_at(now(), std::move(task)); }
  TimerId post_after(Millis delay, Task task) { return post_at(now() + delay, std::move(task)); }
};

/// Single-threaded event loop.
///
/// In virtual mode time only moves when run_until() advances it, which makes
/// every run a pure function of the posted work. Real-time mode follows the
/// steady clock, sleeps between tasks and accepts posts from other threads
/// (used when talking to a live broker).
class EventLoop final : public Scheduler {
 public:
  enum class Mode { virtual_time, real_time };

  explicit EventLoop(Mode mode = Mode::virtual_time);

  Millis now() const override;
  TimerId post_at(Millis when, Task task) override;
  void cancel(TimerId id) override;

  void run_until(Millis until);
  void run_for(Millis duration) { run_until(now() + duration); }
  /// Runs until no task is due before `limit`; returns the number executed.
  std::size_t drain(Millis limit);

  std::size_t pending() const;
  Mode mode() const noexcept { return mode_; }

 private:
  struct Item {
    Millis when;
    TimerId id;
    Task task;
  };
  struct Later {
    bool operator()(const Item& a, const Item& b) const {
      return a.when != b.when ? a.when > b.when : a.id > b.id;
    }
  };

  bool pop_due(Millis until, Item& out);

  Mode mode_;
  std::chrono::steady_clock::time_point epoch_;
  Millis virtual_now_{0};
  TimerId next_id_ = 1;
  std::priority_queue<Item, std::vector<Item>, Later> queue_;
  std::set<TimerId> cancelled_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
};

}  // namespace nstream
