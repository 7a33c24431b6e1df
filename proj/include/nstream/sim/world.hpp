#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nstream/broker/broker.hpp"
#include "nstream/broker/webhooks.hpp"
#include "nstream/connectors/in_memory.hpp"
#include "nstream/connectors/sfu.hpp"
#include "nstream/connectors/storage.hpp"
#include "nstream/engine/session.hpp"
#include "nstream/runtime/scheduler.hpp"
#include "nstream/runtime/sim_network.hpp"
#include "nstream/sim/scenario.hpp"

namespace nstream {

class WsClientContext;

/// Everything a scenario runs against: the virtual clock, the signaling
/// and media networks, one instance of every service, and the actors with
/// their connectors and sessions.
///
/// Sessions are keyed `<actor>:<stream>`. Session uids are `<actor>.<n>`
/// and never contain a stream name.
///
/// A connector spec of `rtclite:ws://host:port` (or `sfu:ws://...`) talks
/// to a live server over websockets in real time instead.
class World {
 public:
  struct ActorOptions {
    bool autopause = false;
    std::optional<std::string> secret;
  };

  World(std::uint64_t seed, const std::string& connector, double frame_loss = 0.0);
  ~World();
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  EventLoop& loop() noexcept { return *loop_; }
  bool live() const noexcept { return !live_origin_.empty(); }
  const std::string& scheme() const noexcept { return scheme_; }
  std::uint64_t seed() const noexcept { return seed_; }

  SimNetwork& network() noexcept { return *net_; }
  MediaNetwork& media() noexcept { return *media_; }
  Broker& broker() noexcept { return *broker_; }
  SfuService& sfu() noexcept { return *sfu_; }
  InMemoryHub& hub() noexcept { return *hub_; }
  MemoryStorage& storage() noexcept { return *storage_; }
  RecordingWebhookSink& webhooks() noexcept { return webhooks_; }

  void spawn(const std::string& actor) { spawn(actor, ActorOptions()); }
  void spawn(const std::string& actor, ActorOptions options);
  bool has_actor(const std::string& actor) const { return actors_.count(actor) != 0; }
  const ActorOptions& actor_options(const std::string& actor) const;
  /// The actor's connector for `scheme`, created on first use.
  Connector& connector(const std::string& actor, const std::string& scheme);

  /// Returns the session for `<actor>:<stream>`, creating it on first use.
  /// `ref` is what the session asks the service for (raw or hashed).
  EndpointSession& session(const std::string& actor, const std::string& stream, const StreamRef& ref,
                           const std::string& scheme);
  EndpointSession* find(const std::string& key);
  const EndpointSession* find(const std::string& key) const;
  const std::map<std::string, std::unique_ptr<EndpointSession>>& sessions() const noexcept { return sessions_; }
  std::vector<EndpointSession*> sessions_of(const std::string& actor);

  /// Distinct ids of connected links across every session. A mesh pair
  /// shares one id; a server link is shared by all sessions of one actor.
  std::size_t link_count() const;
  /// "live" or "idle" as the service behind the default scheme sees it.
  std::string stream_status(const std::string& name);

  /// Severs the actor's signaling connections.
  std::size_t drop_transport(const std::string& actor);
  /// Takes the broker down now and brings a fresh one up after `down`.
  void restart_broker(Millis down);

  /// Sees every signaling line an actor's connectors send or receive.
  /// Only affects connectors created after the call.
  using WireTap = std::function<void(const std::string& actor, bool inbound, const std::string& line)>;
  void set_wire_tap(WireTap tap) { wire_tap_ = std::move(tap); }

 private:
  struct Actor {
    ActorOptions options;
    std::map<std::string, std::unique_ptr<Connector>> connectors;
    std::uint64_t next_session = 1;
  };

  TransportFactory factory_for(const std::string& actor);
  std::string origin_for(const std::string& scheme) const;

  std::uint64_t seed_;
  std::string scheme_;
  std::string live_origin_;
  std::unique_ptr<EventLoop> loop_;
  std::unique_ptr<WsClientContext> ws_;
  std::unique_ptr<SimNetwork> net_;
  std::unique_ptr<MediaNetwork> media_;
  RecordingWebhookSink webhooks_;
  std::unique_ptr<Broker> broker_;
  std::vector<std::unique_ptr<Broker>> retired_brokers_;
  std::unique_ptr<SfuService> sfu_;
  std::unique_ptr<InMemoryHub> hub_;
  std::unique_ptr<MemoryStorage> storage_;
  std::map<std::string, Actor> actors_;
  std::map<std::string, std::unique_ptr<EndpointSession>> sessions_;
  WireTap wire_tap_;
};

struct ExpectResult {
  Millis at{0};
  std::string expect;
  bool ok = false;
  std::string detail;
};

/// Outcome of a run: who is in which stream, which links exist, per-track
/// frame counts and the result of every `expect`.
struct TopologyReport {
  struct StreamEntry {
    std::string name;
    std::string status;
    std::vector<std::string> publishers;
    std::vector<std::string> subscribers;
  };
  struct LinkEntry {
    std::string id;
    bool connected = false;
    std::map<std::string, std::string> ends;  // session key -> link state
  };
  struct TrackFrames {
    std::string session;
    std::string track;
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
  };

  std::uint64_t seed = 0;
  std::string connector;
  Millis end_time{0};
  std::vector<StreamEntry> streams;
  std::size_t link_count = 0;
  std::vector<LinkEntry> links;
  std::vector<TrackFrames> frames;
  std::vector<ExpectResult> assertions;
  std::vector<std::string> action_errors;
  std::map<std::string, std::vector<std::string>> transcripts;

  std::size_t stream_count() const;
  /// delivered + dropped <= sent for every subscriber track.
  bool consistent() const;
  bool ok() const;
  std::string to_json() const;
};

/// Subscriber-visible events with timing and link ids stripped: connected,
/// disconnected, tracks, message and hint entries are kept, a run of frame
/// entries becomes one "frames", everything else is dropped.
std::vector<std::string> subscriber_view(const EndpointSession& session);

class ScenarioRunner {
 public:
  struct Options {
    Millis settle{1000};
    bool transcripts = false;
  };

  explicit ScenarioRunner(Scenario scenario) : ScenarioRunner(std::move(scenario), Options{}) {}
  ScenarioRunner(Scenario scenario, Options options);
  ~ScenarioRunner();

  /// Runs every step (once) and returns the report.
  TopologyReport run();
  World& world() noexcept { return *world_; }
  const Scenario& scenario() const noexcept { return scenario_; }

 private:
  void execute(const ScenarioStep& step);
  void act(const ScenarioStep& step);
  ExpectResult evaluate(const ScenarioStep& step);
  TopologyReport build_report() const;

  Scenario scenario_;
  Options options_;
  std::unique_ptr<World> world_;
  std::vector<ExpectResult> assertions_;
  std::vector<std::string> action_errors_;
  bool ran_ = false;
};

/// Convenience wrapper: deterministic for a given scenario under the
/// virtual clock. Throws Errc::param when the connector is unavailable.
TopologyReport run_scenario(const Scenario& scenario);

}  // namespace nstream
