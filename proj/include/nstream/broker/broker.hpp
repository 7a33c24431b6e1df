#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nstream/broker/webhooks.hpp"
#include "nstream/core/stream_record.hpp"
#include "nstream/error.hpp"
#include "nstream/protocol/envelope.hpp"
#include "nstream/runtime/scheduler.hpp"
#include "nstream/runtime/transport.hpp"

namespace nstream {

/// The notification broker: keeps the stream registry, applies
/// PUBLISH/SUBSCRIBE/STOP, tells each side about the other and relays all
/// other envelopes between members. It never sees media.
///
/// Transport-agnostic: the websocket server and the simulator both drive
/// it through the LineService callbacks, always from one thread.
class Broker final : public LineService {
 public:
  struct Options {
    Millis idle_grace{60'000};
    /// Refuse raw-name subscriptions (publishers still use raw names).
    bool hashed_only = false;
  };

  struct Counters {
    std::uint64_t sessions_accepted = 0;
    std::uint64_t envelopes_in = 0;
    std::uint64_t envelopes_relayed = 0;
    std::uint64_t malformed = 0;
    std::uint64_t errors_sent = 0;
  };

  /// Observes every line the broker receives (`inbound` true) or sends.
  using Tap = std::function<void(bool inbound, const EndpointId& ep, std::string_view line)>;

  Broker(Scheduler& sched, Options options, WebhookSink* webhooks = nullptr);
  explicit Broker(Scheduler& sched) : Broker(sched, Options{}) {}
  ~Broker() override;

  void on_open(const std::shared_ptr<LinePeer>& peer) override;
  void on_line(const std::shared_ptr<LinePeer>& peer, std::string_view line) override;
  void on_close(const std::shared_ptr<LinePeer>& peer) override;

  void set_tap(Tap tap) { tap_ = std::move(tap); }

  const StreamRegistry& registry() const noexcept { return registry_; }
  const Counters& counters() const noexcept { return counters_; }
  std::size_t session_count() const noexcept { return sessions_.size(); }
  /// Registry and session-table invariant violations; empty when consistent.
  std::vector<std::string> audit() const;
  /// JSON snapshot of every stream record.
  std::string snapshot() const;
  /// Drops streams that have stayed empty past the grace period.
  std::size_t collect_idle();

 private:
  enum class Side { publisher, subscriber };
  struct Membership {
    Side side;
    StreamRef ref;
    std::vector<std::string> ping;
  };
  struct Session {
    std::shared_ptr<LinePeer> peer;
    EndpointId ep;
    SeqCounter seq;
    std::map<StreamName, Membership> streams;
  };

  void handle(Session& s, const SignalEnvelope& env);
  void join(Session& s, const SignalEnvelope& env, Side side);
  void leave(Session& s, const StreamName& name);
  void relay(Session& s, const SignalEnvelope& env);
  void send_event(const EndpointId& to, const StreamName& name, const std::string& event,
                  const std::optional<EndpointId>& peer);
  void send_error(Session& s, const std::optional<StreamRef>& stream, const Error& err);
  void send_line(Session& s, std::string line);
  Session* session(const EndpointId& ep);
  StreamRef ref_for(const Session& s, const StreamName& name) const;
  void fire_webhook(const std::string& event, const Membership& m, const EndpointId& ep);
  void schedule_gc();

  Scheduler& sched_;
  Options options_;
  WebhookSink* webhooks_;
  StreamRegistry registry_;
  std::map<const LinePeer*, Session> sessions_;
  std::map<EndpointId, const LinePeer*> by_id_;
  std::uint64_t next_id_ = 1;
  Counters counters_;
  Tap tap_;
  Scheduler::TimerId gc_timer_ = 0;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

}  // namespace nstream
