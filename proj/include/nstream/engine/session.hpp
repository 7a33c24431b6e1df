#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nstream/engine/address.hpp"
#include "nstream/engine/connector.hpp"
#include "nstream/engine/media.hpp"
#include "nstream/engine/media_network.hpp"
#include "nstream/engine/peer_link.hpp"
#include "nstream/engine/sealing.hpp"
#include "nstream/runtime/scheduler.hpp"

namespace nstream {

enum class Role { unset, publisher, subscriber };
std::string_view to_string(Role role) noexcept;

struct SessionContext {
  Scheduler& scheduler;
  MediaNetwork& media;
  /// Unique label used to build link ids. Must not contain the stream name.
  std::string uid;
};

struct TranscriptEntry {
  Millis at;
  std::string kind;
  std::string detail;
};

/// One publish-or-subscribe endpoint: the peer links, local and remote
/// media, the data channel, autopause and frame sealing.
///
/// All calls must come from the session's scheduler. Connectors keep raw
/// pointers to the sessions attached to them, so a session must be stopped
/// or destroyed before its connector.
class EndpointSession {
 public:
  static constexpr std::size_t kSendQueueLimit = 256;
  static constexpr std::size_t kPendingFramesPerTrack = 64;

  EndpointSession(SessionContext ctx, StreamAddress address);
  ~EndpointSession();
  EndpointSession(const EndpointSession&) = delete;
  EndpointSession& operator=(const EndpointSession&) = delete;

  // --- application side -------------------------------------------------

  /// Requires role unset and local media. Errors reported later by the
  /// service (e.g. PublisherConflict) reset the role to unset.
  void publish(Connector& conn);
  /// Point-to-point mode: one link whose signaling goes to on_data().
  void publish();
  void subscribe(Connector& conn);
  void subscribe();
  void stop();

  /// Publisher: to every subscriber. Subscriber: to the publisher. Queued
  /// (bounded, oldest dropped) until a link connects.
  void send(std::string text);
  void add_tracks(std::vector<TrackDescriptor> tracks);
  void remove_tracks(const std::vector<std::string>& labels);
  void set_playing(bool playing);
  void set_muted(bool muted);
  /// Replaces the publishing source; a RelaySource over another session's
  /// remote_media() makes this session a fork node.
  void set_input(std::shared_ptr<MediaSource> source);
  void set_autopause(bool on) { autopause_ = on; }
  void set_secret(std::optional<std::string> secret);
  void set_ping(std::string urls) { ping_ = std::move(urls); }

  void on_data(std::function<void(std::string)> handler) { data_handler_ = std::move(handler); }
  void on_message(std::function<void(const std::string&)> handler) { message_handler_ = std::move(handler); }

  Role role() const noexcept { return role_; }
  const StreamAddress& address() const noexcept { return address_; }
  const std::string& uid() const noexcept { return ctx_.uid; }
  Scheduler& scheduler() const noexcept { return ctx_.scheduler; }
  Connector* connector() const noexcept { return connector_; }
  const std::vector<TrackDescriptor>& tracks() const noexcept { return tracks_; }
  const std::string& ping() const noexcept { return ping_; }
  const std::shared_ptr<MediaSource>& local_media() const noexcept { return source_; }
  const std::shared_ptr<MediaSink>& remote_media() const noexcept { return sink_; }
  std::vector<PeerLink> links() const;
  const PeerLink* link(const std::string& id) const;
  std::size_t open_link_count() const;
  bool playing() const noexcept { return playing_; }
  bool muted() const noexcept { return muted_; }
  bool autopause() const noexcept { return autopause_; }
  bool channel() const noexcept { return channel_; }
  const std::optional<Error>& last_error() const noexcept { return last_error_; }

  std::uint64_t integrity_errors() const noexcept { return integrity_errors_; }
  std::uint64_t frames_dropped() const noexcept { return frames_dropped_; }
  const std::map<std::string, std::uint64_t>& frames_emitted() const noexcept { return frames_emitted_; }
  /// Inbound frames not delivered to the sink, integrity failures included.
  const std::map<std::string, std::uint64_t>& dropped_by_track() const noexcept { return dropped_by_track_; }

  const std::vector<TranscriptEntry>& transcript() const noexcept { return transcript_; }
  void record(std::string kind, std::string detail);

  // --- signaling side (used by connectors) -------------------------------

  /// Feeds signaling data produced by a counterpart. Throws
  /// Errc::link_unknown, Errc::state or Errc::validation.
  void apply(std::string_view payload, const std::optional<EndpointId>& from = std::nullopt,
             Connector* via = nullptr);
  /// A counterpart appeared. A publisher opens a link and offers.
  void peer_joined(const EndpointId& peer, Connector& via);
  /// Subscriber side: the stream now has a live publisher.
  void publisher_available(const EndpointId& publisher);
  /// Closes every link to `peer`.
  void peer_left(const EndpointId& peer);
  /// The connector lost its service; every link it negotiated is gone.
  void links_lost(Connector& via);
  /// For connectors that own link negotiation: the media path for a link.
  void detach_link(const std::string& link_id);
  /// For connectors that own link negotiation: adds an already connected
  /// link whose media goes through `port`.
  void attach_link(const std::string& link_id, const EndpointId& counterpart, std::shared_ptr<MediaPort> port,
                   Connector& via, std::vector<TrackDescriptor> remote_tracks);
  void remote_tracks_added(const std::vector<TrackDescriptor>& tracks);
  void remote_tracks_removed(const std::vector<std::string>& labels);
  /// Inbound media or in-band message on a link.
  void deliver(const std::string& link_id, MediaItem item);
  void service_error(const Error& error);

 private:
  struct LinkEntry {
    PeerLink link;
    Connector* owner = nullptr;
    std::shared_ptr<MediaPort> port;
    std::string last_offer;
  };

  LinkEntry* find_link(const std::string& id);
  LinkEntry& open_link(const EndpointId& counterpart, Connector* owner);
  void emit_signal(LinkEntry& entry, MessageKind kind, std::string payload);
  void on_connected(LinkEntry& entry);
  void close_link(LinkEntry& entry);
  void close_all_links();
  void reset_role();
  void start_source();
  void on_local_frame(MediaFrame frame);
  void on_source_tracks(const std::vector<TrackDescriptor>& tracks);
  void send_in_band(const ChannelMessage& msg);
  void flush_send_queue();
  void set_remote_tracks(std::vector<TrackDescriptor> tracks, bool force);
  void flush_pending();
  void propagate_track_diff(const std::vector<TrackDescriptor>& before);
  void accept_frame(LinkEntry& entry, MediaFrame frame);
  void note_drop(const std::string& label);
  void begin(Role role, Connector* conn);

  SessionContext ctx_;
  StreamAddress address_;
  std::string media_address_;
  std::string frame_stream_;
  Role role_ = Role::unset;
  Connector* connector_ = nullptr;
  std::deque<LinkEntry> links_;
  std::uint64_t next_link_ = 1;

  std::vector<TrackDescriptor> tracks_;
  std::shared_ptr<MediaSource> source_;
  std::shared_ptr<MediaSink> sink_ = std::make_shared<MediaSink>();
  std::map<std::string, std::uint64_t> next_seq_;
  std::map<std::string, std::deque<MediaFrame>> pending_frames_;
  std::set<std::string> removed_labels_;

  bool playing_ = true;
  bool muted_ = false;
  bool autopause_ = false;
  bool channel_ = false;
  std::optional<std::string> secret_;
  std::optional<FrameSealer> sealer_;
  std::string ping_;
  std::deque<std::string> send_queue_;

  std::function<void(std::string)> data_handler_;
  std::function<void(const std::string&)> message_handler_;

  std::optional<Error> last_error_;
  std::uint64_t integrity_errors_ = 0;
  std::uint64_t frames_dropped_ = 0;
  std::map<std::string, std::uint64_t> frames_emitted_;
  std::map<std::string, std::uint64_t> dropped_by_track_;
  std::vector<TranscriptEntry> transcript_;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

}  // namespace nstream
