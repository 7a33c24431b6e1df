#include "nstream/engine/media.hpp"

#include <fstream>
#include <iterator>

#include "nstream/error.hpp"

namespace nstream {
namespace {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t track_seed(std::uint64_t seed, const std::string& label) {
  return fnv1a(label.data(), label.size(), fnv1a(&seed, sizeof seed));
}

void fill(std::mt19937_64& rng, std::vector<std::uint8_t>& out, std::size_t n) {
  out.resize(n);
  for (std::size_t i = 0; i < n; i += 8) {
    auto word = rng();
    for (std::size_t b = 0; b < 8 && i + b < n; ++b) out[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
  }
}

}  // namespace

std::string payload_digest(const std::vector<std::uint8_t>& payload) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto h = fnv1a(payload.data(), payload.size());
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

SyntheticSource::SyntheticSource(std::vector<TrackDescriptor> tracks, std::uint64_t seed, Millis interval,
                                 std::size_t frame_bytes)
    : seed_(seed), interval_(interval), frame_bytes_(frame_bytes) {
  set_tracks(std::move(tracks));
}

SyntheticSource::~SyntheticSource() { stop(); }

void SyntheticSource::set_tracks(std::vector<TrackDescriptor> tracks) {
  require_unique_labels(tracks);
  tracks_ = std::move(tracks);
  for (const auto& t : tracks_) {
    if (!state_.contains(t.label)) state_.emplace(t.label, TrackState{std::mt19937_64(track_seed(seed_, t.label)), 0});
  }
}

void SyntheticSource::start(Scheduler& sched, FrameFn on_frame, TracksFn /*on_tracks*/) {
  stop();
  alive_ = std::make_shared<bool>(true);
  sched_ = &sched;
  on_frame_ = std::move(on_frame);
  auto alive = alive_;
  timer_ = sched.post_after(interval_, [this, alive] {
    if (*alive) tick();
  });
}

void SyntheticSource::stop() {
  if (sched_ != nullptr) sched_->cancel(timer_);
  *alive_ = false;
  sched_ = nullptr;
}

void SyntheticSource::tick() {
  auto alive = alive_;
  auto now = sched_->now();
  for (const auto& t : tracks_) {
    auto& st = state_.at(t.label);
    MediaFrame f;
    f.track_label = t.label;
    f.seq = st.next_seq++;
    f.ts_ms = now.count();
    fill(st.rng, f.payload, frame_bytes_);
    on_frame_(std::move(f));
    if (!*alive) return;  // stopped from inside the callback
  }
  timer_ = sched_->post_after(interval_, [this, alive] {
    if (*alive) tick();
  });
}

std::vector<std::uint8_t> SyntheticSource::expected_payload(std::uint64_t seed, const std::string& label,
                                                            std::uint64_t seq, std::size_t frame_bytes) {
  std::mt19937_64 rng(track_seed(seed, label));
  std::vector<std::uint8_t> out;
  for (std::uint64_t i = 0; i <= seq; ++i) fill(rng, out, frame_bytes);
  return out;
}

FileReplaySource::FileReplaySource(const std::filesystem::path& path, std::string label, Millis interval,
                                   std::size_t frame_bytes)
    : label_(std::move(label)), interval_(interval), frame_bytes_(frame_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::param, "cannot open replay file " + path.string());
  bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

FileReplaySource::~FileReplaySource() { stop(); }

std::vector<TrackDescriptor> FileReplaySource::tracks() const { return {TrackDescriptor{TrackKind::video, label_, true}}; }

std::size_t FileReplaySource::frame_count() const noexcept { return (bytes_.size() + frame_bytes_ - 1) / frame_bytes_; }

std::vector<std::uint8_t> FileReplaySource::frame_payload(std::size_t index) const {
  auto begin = index * frame_bytes_;
  auto end = std::min(bytes_.size(), begin + frame_bytes_);
  return {bytes_.begin() + static_cast<std::ptrdiff_t>(begin), bytes_.begin() + static_cast<std::ptrdiff_t>(end)};
}

void FileReplaySource::start(Scheduler& sched, FrameFn on_frame, TracksFn /*on_tracks*/) {
  stop();
  alive_ = std::make_shared<bool>(true);
  sched_ = &sched;
  on_frame_ = std::move(on_frame);
  auto alive = alive_;
  timer_ = sched.post_after(interval_, [this, alive] {
    if (*alive) tick();
  });
}

void FileReplaySource::stop() {
  if (sched_ != nullptr) sched_->cancel(timer_);
  *alive_ = false;
  sched_ = nullptr;
}

void FileReplaySource::tick() {
  if (next_ >= frame_count()) return;
  MediaFrame f;
  f.track_label = label_;
  f.seq = next_;
  f.ts_ms = sched_->now().count();
  f.payload = frame_payload(next_);
  ++next_;
  auto alive = alive_;
  on_frame_(std::move(f));
  if (!*alive) return;
  timer_ = sched_->post_after(interval_, [this, alive] {
    if (*alive) tick();
  });
}

void MediaSink::push(const MediaFrame& frame) {
  auto& ring = recent_[frame.track_label];
  ring.push_back(frame);
  if (ring.size() > kBufferPerTrack) ring.pop_front();
  ++delivered_[frame.track_label];
  auto listeners = listeners_;
  for (auto& [_, l] : listeners) {
    if (l.first) l.first(frame);
  }
}

void MediaSink::set_tracks(std::vector<TrackDescriptor> tracks) {
  tracks_ = std::move(tracks);
  auto listeners = listeners_;
  for (auto& [_, l] : listeners) {
    if (l.second) l.second(tracks_);
  }
}

std::size_t MediaSink::delivered(const std::string& label) const {
  auto it = delivered_.find(label);
  return it == delivered_.end() ? 0 : it->second;
}

std::size_t MediaSink::delivered_total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : delivered_) n += c;
  return n;
}

const std::deque<MediaFrame>& MediaSink::recent(const std::string& label) const {
  static const std::deque<MediaFrame> kEmpty;
  auto it = recent_.find(label);
  return it == recent_.end() ? kEmpty : it->second;
}

int MediaSink::listen(FrameListener on_frame, TracksListener on_tracks) {
  auto token = next_token_++;
  listeners_.emplace(token, std::make_pair(std::move(on_frame), std::move(on_tracks)));
  return token;
}

void MediaSink::unlisten(int token) { listeners_.erase(token); }

RelaySource::RelaySource(std::shared_ptr<MediaSink> upstream) : upstream_(std::move(upstream)) {
  if (!upstream_) throw Error(Errc::param, "relay needs an upstream sink");
}

RelaySource::~RelaySource() { stop(); }

std::vector<TrackDescriptor> RelaySource::tracks() const { return upstream_->tracks(); }

void RelaySource::start(Scheduler& /*sched*/, FrameFn on_frame, TracksFn on_tracks) {
  stop();
  token_ = upstream_->listen(
      [this, on_frame = std::move(on_frame)](const MediaFrame& in) {
        MediaFrame out = in;
        out.sealed = false;
        out.seq = next_seq_[in.track_label]++;
        on_frame(std::move(out));
      },
      std::move(on_tracks));
}

void RelaySource::stop() {
  if (token_ != 0) upstream_->unlisten(token_);
  token_ = 0;
}

}  // namespace nstream
