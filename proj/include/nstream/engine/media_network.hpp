#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>

#include "nstream/engine/media.hpp"
#include "nstream/runtime/scheduler.hpp"

namespace nstream {

/// Outbound half of a media path.
class MediaPort {
 public:
  virtual ~MediaPort() = default;
  virtual void send(MediaItem item) = 0;
};

/// Simulated peer-to-peer media plane: sessions bind an address, peer
/// links send frames and in-band messages between addresses. Delivery is
/// FIFO per (from, to) with seeded latency; frames (never channel
/// messages) may be lost with probability `frame_loss`.
class MediaNetwork {
 public:
  using Receiver = std::function<void(const std::string& link_id, MediaItem item)>;

  struct Options {
    Millis min_latency{1};
    Millis max_latency{20};
    double frame_loss = 0.0;
  };

  MediaNetwork(Scheduler& sched, std::uint64_t seed);
  MediaNetwork(Scheduler& sched, std::uint64_t seed, Options options);

  std::string bind(Receiver receiver);
  void unbind(const std::string& address);

  std::shared_ptr<MediaPort> port(std::string from, std::string to, std::string link_id);

  std::uint64_t frames_carried() const noexcept { return carried_; }
  std::uint64_t frames_lost() const noexcept { return lost_; }

 private:
  friend class NetworkPort;
  void send(const std::string& from, const std::string& to, const std::string& link_id, MediaItem item);

  Scheduler& sched_;
  Options options_;
  std::mt19937_64 rng_;
  std::map<std::string, Receiver> receivers_;
  std::map<std::pair<std::string, std::string>, Millis> last_;
  std::uint64_t next_address_ = 1;
  std::uint64_t carried_ = 0;
  std::uint64_t lost_ = 0;
};

}  // namespace nstream
