#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "nstream/core/types.hpp"
#include "nstream/protocol/envelope.hpp"
#include "nstream/runtime/scheduler.hpp"

namespace nstream {

/// One unit of simulated media on a track.
struct MediaFrame {
  std::string stream;
  std::string track_label;
  std::uint64_t seq = 0;
  std::int64_t ts_ms = 0;
  std::vector<std::uint8_t> payload;
  bool sealed = false;

  bool operator==(const MediaFrame&) const = default;
};

/// In-band data-channel message on a peer link (TEXT or PAUSE_HINT).
struct ChannelMessage {
  MessageKind kind = MessageKind::text;
  std::string payload;

  bool operator==(const ChannelMessage&) const = default;
};

using MediaItem = std::variant<MediaFrame, ChannelMessage>;

/// 64-bit FNV-1a of the payload, hex; compact content address for transcripts.
std::string payload_digest(const std::vector<std::uint8_t>& payload);

/// Producer of frames for a set of tracks.
class MediaSource {
 public:
  using FrameFn = std::function<void(MediaFrame)>;
  using TracksFn = std::function<void(const std::vector<TrackDescriptor>&)>;

  virtual ~MediaSource() = default;

  virtual std::vector<TrackDescriptor> tracks() const = 0;
  virtual void start(Scheduler& sched, FrameFn on_frame, TracksFn on_tracks) = 0;
  virtual void stop() = 0;
  /// Whether add/remove of tracks can be driven from the publishing side.
  virtual bool editable() const { return false; }
  virtual void set_tracks(std::vector<TrackDescriptor> /*tracks*/) {}
};

/// Deterministic pattern source: every interval each track emits one frame
/// of `frame_bytes` pseudorandom bytes from a generator seeded per track.
class SyntheticSource final : public MediaSource {
 public:
  static constexpr Millis kDefaultInterval{50};
  static constexpr std::size_t kDefaultFrameBytes = 256;

  SyntheticSource(std::vector<TrackDescriptor> tracks, std::uint64_t seed, Millis interval = kDefaultInterval,
                  std::size_t frame_bytes = kDefaultFrameBytes);
  ~SyntheticSource() override;

  std::vector<TrackDescriptor> tracks() const override { return tracks_; }
  void start(Scheduler& sched, FrameFn on_frame, TracksFn on_tracks) override;
  void stop() override;
  bool editable() const override { return true; }
  void set_tracks(std::vector<TrackDescriptor> tracks) override;

  /// Frame a track would produce at `seq`, recomputed from scratch. Lets
  /// tests check delivered payloads without reading the sender's state.
  static std::vector<std::uint8_t> expected_payload(std::uint64_t seed, const std::string& label, std::uint64_t seq,
                                                    std::size_t frame_bytes = kDefaultFrameBytes);

 private:
  void tick();

  struct TrackState {
    std::mt19937_64 rng;
    std::uint64_t next_seq = 0;
  };

  std::vector<TrackDescriptor> tracks_;
  std::uint64_t seed_;
  Millis interval_;
  std::size_t frame_bytes_;
  std::map<std::string, TrackState> state_;
  Scheduler* sched_ = nullptr;
  Scheduler::TimerId timer_ = 0;
  FrameFn on_frame_;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

/// Replays a file as a single video track, cut into fixed-size frames.
class FileReplaySource final : public MediaSource {
 public:
  FileReplaySource(const std::filesystem::path& path, std::string label = "video",
                   Millis interval = SyntheticSource::kDefaultInterval,
                   std::size_t frame_bytes = SyntheticSource::kDefaultFrameBytes);
  ~FileReplaySource() override;

  std::vector<TrackDescriptor> tracks() const override;
  void start(Scheduler& sched, FrameFn on_frame, TracksFn on_tracks) override;
  void stop() override;

  std::size_t frame_count() const noexcept;
  std::vector<std::uint8_t> frame_payload(std::size_t index) const;

 private:
  void tick();

  std::vector<std::uint8_t> bytes_;
  std::string label_;
  Millis interval_;
  std::size_t frame_bytes_;
  std::size_t next_ = 0;
  Scheduler* sched_ = nullptr;
  Scheduler::TimerId timer_ = 0;
  FrameFn on_frame_;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

/// Receiving end of a subscription: keeps the last 64 frames per track,
/// per-track delivery counts, the remote track set, and fans frames out to
/// listeners (which is how a relay republishes).
class MediaSink {
 public:
  static constexpr std::size_t kBufferPerTrack = 64;
  using FrameListener = std::function<void(const MediaFrame&)>;
  using TracksListener = std::function<void(const std::vector<TrackDescriptor>&)>;

  void push(const MediaFrame& frame);
  void set_tracks(std::vector<TrackDescriptor> tracks);
  const std::vector<TrackDescriptor>& tracks() const noexcept { return tracks_; }

  std::size_t delivered(const std::string& label) const;
  std::size_t delivered_total() const;
  const std::deque<MediaFrame>& recent(const std::string& label) const;

  int listen(FrameListener on_frame, TracksListener on_tracks);
  void unlisten(int token);

  bool remote_paused = false;

 private:
  std::vector<TrackDescriptor> tracks_;
  std::map<std::string, std::deque<MediaFrame>> recent_;
  std::map<std::string, std::size_t> delivered_;
  std::map<int, std::pair<FrameListener, TracksListener>> listeners_;
  int next_token_ = 1;
};

/// Republishes whatever a sink receives (the fork node of a broadcast
/// tree). Frames keep payload and origin timestamp; seq is renumbered per
/// track so the republished stream is monotone on its own.
class RelaySource final : public MediaSource {
 public:
  explicit RelaySource(std::shared_ptr<MediaSink> upstream);
  ~RelaySource() override;

  std::vector<TrackDescriptor> tracks() const override;
  void start(Scheduler& sched, FrameFn on_frame, TracksFn on_tracks) override;
  void stop() override;

 private:
  std::shared_ptr<MediaSink> upstream_;
  int token_ = 0;
  std::map<std::string, std::uint64_t> next_seq_;
};

}  // namespace nstream
