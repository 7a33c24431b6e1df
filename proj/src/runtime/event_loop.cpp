#include "nstream/runtime/scheduler.hpp"

namespace nstream {

EventLoop::EventLoop(Mode mode) : mode_(mode), epoch_(std::chrono::steady_clock::now()) {}

Millis EventLoop::now() const {
  if (mode_ == Mode::real_time)
    return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - epoch_);
  std::lock_guard lock(mutex_);
  return virtual_now_;
}

Scheduler::TimerId EventLoop::post_at(Millis when, Task task) {
  std::lock_guard lock(mutex_);
  if (mode_ == Mode::virtual_time && when < virtual_now_) when = virtual_now_;
  auto id = next_id_++;
  queue_.push(Item{when, id, std::move(task)});
  wake_.notify_all();
  return id;
}

void EventLoop::cancel(TimerId id) {
  std::lock_guard lock(mutex_);
  cancelled_.insert(id);
}

bool EventLoop::pop_due(Millis until, Item& out) {
  std::unique_lock lock(mutex_);
  for (;;) {
    while (!queue_.empty() && cancelled_.erase(queue_.top().id) > 0) queue_.pop();
    if (mode_ == Mode::virtual_time) {
      if (queue_.empty() || queue_.top().when > until) return false;
      out = queue_.top();
      queue_.pop();
      virtual_now_ = out.when;
      return true;
    }
    auto current = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - epoch_);
    if (!queue_.empty() && queue_.top().when <= current && queue_.top().when <= until) {
      out = queue_.top();
      queue_.pop();
      return true;
    }
    if (current >= until) return false;
    auto next = queue_.empty() ? until : std::min(until, queue_.top().when);
    wake_.wait_for(lock, next - current);
  }
}

void EventLoop::run_until(Millis until) {
  Item item;
  while (pop_due(until, item)) item.task();
  if (mode_ == Mode::virtual_time) {
    std::lock_guard lock(mutex_);
    if (virtual_now_ < until) virtual_now_ = until;
  }
}

std::size_t EventLoop::drain(Millis limit) {
  std::size_t n = 0;
  Item item;
  while (pop_due(limit, item)) {
    item.task();
    ++n;
  }
  return n;
}

std::size_t EventLoop::pending() const {
  std::lock_guard lock(mutex_);
  return queue_.size() - std::min(queue_.size(), cancelled_.size());
}

}  // namespace nstream
