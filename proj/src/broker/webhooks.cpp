#include "nstream/broker/webhooks.hpp"

#include <sstream>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"

namespace nstream {

std::string WebhookEvent::body() const {
  nlohmann::ordered_json j;
  j["event"] = event;
  j["stream"] = stream;
  j["endpoint"] = endpoint;
  j["ts"] = ts_ms;
  return j.dump();
}

std::vector<std::string> parse_webhook_targets(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string url;
  while (in >> url) {
    if (url.rfind("http://", 0) == 0 || url.rfind("https://", 0) == 0) out.push_back(url);
  }
  return out;
}

void RecordingWebhookSink::deliver(const WebhookEvent& event, const std::vector<std::string>& urls) {
  for (const auto& url : urls) posts_.push_back({url, event});
}

WebhookDispatcher::WebhookDispatcher(std::chrono::milliseconds connect_timeout)
    : connect_timeout_(connect_timeout), worker_([this] { run(); }) {}

WebhookDispatcher::~WebhookDispatcher() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  worker_.join();
}

void WebhookDispatcher::deliver(const WebhookEvent& event, const std::vector<std::string>& urls) {
  if (urls.empty()) return;
  {
    std::lock_guard lock(mutex_);
    for (const auto& url : urls) jobs_.push_back({url, event.body()});
  }
  wake_.notify_one();
}

WebhookDispatcher::Metrics WebhookDispatcher::metrics() const {
  std::lock_guard lock(mutex_);
  return metrics_;
}

void WebhookDispatcher::flush() {
  std::unique_lock lock(mutex_);
  idle_.wait(lock, [this] { return jobs_.empty() && !busy_; });
}

bool WebhookDispatcher::post_once(const Job& job, bool& unreachable) {
  unreachable = false;
  // Split "http://host:port/path" into the client base and the path.
  auto scheme_end = job.url.find("://");
  auto path_start = job.url.find('/', scheme_end + 3);
  auto base = job.url.substr(0, path_start);
  auto path = path_start == std::string::npos ? std::string("/") : job.url.substr(path_start);
  httplib::Client client(base);
  client.set_connection_timeout(connect_timeout_);
  client.set_read_timeout(std::chrono::seconds(2));
  client.set_write_timeout(std::chrono::seconds(2));
  auto res = client.Post(path, job.body, "application/json");
  if (!res) {
    unreachable = true;
    return false;
  }
  return res->status >= 200 && res->status < 300;
}

void WebhookDispatcher::run() {
  for (;;) {
    Job job;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
      if (jobs_.empty()) return;
      job = std::move(jobs_.front());
      jobs_.pop_front();
      busy_ = true;
    }
    bool unreachable = false;
    bool ok = post_once(job, unreachable);
    bool retried = false;
    if (!ok && unreachable) {
      retried = true;
      ok = post_once(job, unreachable);
    }
    {
      std::lock_guard lock(mutex_);
      if (retried) ++metrics_.retries;
      if (ok) {
        ++metrics_.delivered;
      } else {
        ++metrics_.failures;
      }
    }
    if (!ok) spdlog::warn("webhook POST to {} failed", job.url);
    {
      std::lock_guard lock(mutex_);
      busy_ = false;
    }
    idle_.notify_all();
  }
}

}  // namespace nstream
