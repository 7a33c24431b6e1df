#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nstream {

struct WebhookEvent {
  std::string event;  // publish | subscribe | stop
  std::string stream;
  std::string endpoint;
  std::int64_t ts_ms = 0;

  /// `{"event":..,"stream":..,"endpoint":..,"ts":..}`
  std::string body() const;
  bool operator==(const WebhookEvent&) const = default;
};

/// Space-separated absolute http(s) URLs; anything else is dropped.
std::vector<std::string> parse_webhook_targets(const std::string& text);

class WebhookSink {
 public:
  virtual ~WebhookSink() = default;
  /// Must return quickly; delivery happens elsewhere.
  virtual void deliver(const WebhookEvent& event, const std::vector<std::string>& urls) = 0;
};

/// Records deliveries instead of sending them (simulation and tests).
class RecordingWebhookSink final : public WebhookSink {
 public:
  struct Post {
    std::string url;
    WebhookEvent event;
  };
  void deliver(const WebhookEvent& event, const std::vector<std::string>& urls) override;
  const std::vector<Post>& posts() const noexcept { return posts_; }

 private:
  std::vector<Post> posts_;
};

/// HTTP POSTs from a worker thread. Each (event, url) is attempted once
/// and retried once if no HTTP response came back at all; an HTTP error status
/// is not retried. Nothing here ever blocks the caller.
class WebhookDispatcher final : public WebhookSink {
 public:
  struct Metrics {
    std::uint64_t delivered = 0;
    std::uint64_t retries = 0;
    std::uint64_t failures = 0;
  };

  explicit WebhookDispatcher(std::chrono::milliseconds connect_timeout = std::chrono::milliseconds(500));
  ~WebhookDispatcher() override;

  void deliver(const WebhookEvent& event, const std::vector<std::string>& urls) override;
  Metrics metrics() const;
  /// Blocks until the queue is empty and no POST is in flight.
  void flush();

 private:
  struct Job {
    std::string url;
    std::string body;
  };
  void run();
  bool post_once(const Job& job, bool& unreachable);

  std::chrono::milliseconds connect_timeout_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<Job> jobs_;
  bool busy_ = false;
  bool stopping_ = false;
  Metrics metrics_;
  std::thread worker_;
};

}  // namespace nstream
