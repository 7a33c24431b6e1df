#include "nstream/engine/media_network.hpp"

#include <algorithm>

namespace nstream {

class NetworkPort final : public MediaPort {
 public:
  NetworkPort(MediaNetwork& net, std::string from, std::string to, std::string link)
      : net_(net), from_(std::move(from)), to_(std::move(to)), link_(std::move(link)) {}

  void send(MediaItem item) override { net_.send(from_, to_, link_, std::move(item)); }

 private:
  MediaNetwork& net_;
  std::string from_;
  std::string to_;
  std::string link_;
};

MediaNetwork::MediaNetwork(Scheduler& sched, std::uint64_t seed) : MediaNetwork(sched, seed, Options{}) {}

MediaNetwork::MediaNetwork(Scheduler& sched, std::uint64_t seed, Options options)
    : sched_(sched), options_(options), rng_(seed) {}

std::string MediaNetwork::bind(Receiver receiver) {
  auto address = "media://" + std::to_string(next_address_++);
  receivers_.emplace(address, std::move(receiver));
  return address;
}

void MediaNetwork::unbind(const std::string& address) { receivers_.erase(address); }

std::shared_ptr<MediaPort> MediaNetwork::port(std::string from, std::string to, std::string link_id) {
  return std::make_shared<NetworkPort>(*this, std::move(from), std::move(to), std::move(link_id));
}

void MediaNetwork::send(const std::string& from, const std::string& to, const std::string& link_id, MediaItem item) {
  std::uniform_int_distribution<std::int64_t> latency(options_.min_latency.count(), options_.max_latency.count());
  auto delay = Millis(latency(rng_));
  if (std::holds_alternative<MediaFrame>(item) && options_.frame_loss > 0.0) {
    std::bernoulli_distribution lose(options_.frame_loss);
    if (lose(rng_)) {
      ++lost_;
      return;
    }
  }
  auto& last = last_[{from, to}];
  auto at = std::max(last, sched_.now() + delay);
  last = at;
  if (std::holds_alternative<MediaFrame>(item)) ++carried_;
  sched_.post_at(at, [this, to, link_id, item = std::move(item)]() mutable {
    auto it = receivers_.find(to);
    if (it != receivers_.end()) it->second(link_id, std::move(item));
  });
}

}  // namespace nstream
