#include "nstream/sim/world.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

#include "nstream/connectors/broker_connector.hpp"
#include "nstream/connectors/split.hpp"
#include "nstream/error.hpp"
#include "nstream/net/ws_server.hpp"

namespace nstream {
namespace {

constexpr const char* kBrokerHost = "broker";
constexpr const char* kSfuHost = "sfu";

std::uint64_t fnv1a(std::string_view text, std::uint64_t basis) {
  std::uint64_t h = 1469598103934665603ULL ^ basis;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<TrackDescriptor> parse_tracks(const std::string& spec) {
  std::vector<TrackDescriptor> out;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto comma = spec.find(',', start);
    auto item = spec.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) {
      auto colon = item.find(':');
      if (colon == std::string::npos) throw Error(Errc::param, "track must be kind:label, got '" + item + "'");
      out.push_back({track_kind_from_string(item.substr(0, colon)), item.substr(colon + 1), true});
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  require_unique_labels(out);
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& args, std::size_t from, char sep = ' ') {
  std::string out;
  for (std::size_t i = from; i < args.size(); ++i) {
    if (i > from) out += sep;
    out += args[i];
  }
  return out;
}

// Splits positional arguments from key=value options.
struct Args {
  std::vector<std::string> positional;
  std::map<std::string, std::string> options;
  std::set<std::string> flags;

  explicit Args(const std::vector<std::string>& raw) {
    for (const auto& a : raw) {
      auto eq = a.find('=');
      if (eq != std::string::npos) {
        options[a.substr(0, eq)] = a.substr(eq + 1);
      } else if (a == "hashed" || a == "autopause") {
        flags.insert(a);
      } else {
        positional.push_back(a);
      }
    }
  }
  const std::string& at(std::size_t i, const ScenarioStep& step) const {
    if (i >= positional.size()) throw Error(Errc::param, "missing argument: " + step.str());
    return positional[i];
  }
  std::string opt(const std::string& key, std::string fallback = {}) const {
    auto it = options.find(key);
    return it == options.end() ? fallback : it->second;
  }
};

std::string stream_of_key(const std::string& key) { return key.substr(key.find(':') + 1); }

bool entry_matches(const TranscriptEntry& e, const std::string& pattern) {
  auto eq = pattern.find('=');
  if (eq == std::string::npos) return e.kind == pattern;
  return e.kind == pattern.substr(0, eq) && e.detail.find(pattern.substr(eq + 1)) != std::string::npos;
}

}  // namespace

// --- World -------------------------------------------------------------------

World::World(std::uint64_t seed, const std::string& connector, double frame_loss) : seed_(seed) {
  auto colon = connector.find(':');
  scheme_ = connector.substr(0, colon);
  std::string locator = colon == std::string::npos ? std::string{} : connector.substr(colon + 1);
  if (!is_registered_scheme(scheme_)) throw Error(Errc::param, "connector '" + scheme_ + "' is not available");
  if (!locator.empty()) {
    if (!locator.starts_with("ws://") || (scheme_ != "rtclite" && scheme_ != "sfu"))
      throw Error(Errc::param, "only rtclite:ws://... and sfu:ws://... can point at a live server");
    live_origin_ = origin_host(locator).empty() ? locator : "ws://" + origin_host(locator);
  }

  loop_ = std::make_unique<EventLoop>(live() ? EventLoop::Mode::real_time : EventLoop::Mode::virtual_time);
  if (live()) ws_ = std::make_unique<WsClientContext>(*loop_);
  net_ = std::make_unique<SimNetwork>(*loop_, seed);
  media_ = std::make_unique<MediaNetwork>(*loop_, fnv1a("media", seed),
                                          MediaNetwork::Options{Millis(1), Millis(20), frame_loss});
  broker_ = std::make_unique<Broker>(*loop_, Broker::Options{}, &webhooks_);
  net_->listen(kBrokerHost, *broker_);
  sfu_ = std::make_unique<SfuService>(*loop_);
  net_->listen(kSfuHost, *sfu_);
  hub_ = std::make_unique<InMemoryHub>(*loop_);
  storage_ = std::make_unique<MemoryStorage>(*loop_, MemoryStorage::Options{Millis(2), 0.0, seed});
}

World::~World() {
  for (auto& [_, s] : sessions_) {
    try {
      s->stop();
    } catch (const Error&) {
    }
  }
  sessions_.clear();
  actors_.clear();
}

void World::spawn(const std::string& actor, ActorOptions options) {
  if (actor.empty() || actor == "-" || actor.find(':') != std::string::npos || actor.find('.') != std::string::npos)
    throw Error(Errc::param, "bad actor label '" + actor + "'");
  actors_[actor].options = std::move(options);
}

const World::ActorOptions& World::actor_options(const std::string& actor) const {
  auto it = actors_.find(actor);
  if (it == actors_.end()) throw Error(Errc::param, "unknown actor '" + actor + "'");
  return it->second.options;
}

namespace {

class TappedTransport final : public ClientTransport {
 public:
  TappedTransport(std::unique_ptr<ClientTransport> inner, std::string actor, World::WireTap tap)
      : inner_(std::move(inner)), actor_(std::move(actor)), tap_(std::move(tap)) {}

  void open(Handlers handlers) override {
    auto on_line = std::move(handlers.on_line);
    handlers.on_line = [this, on_line = std::move(on_line)](std::string line) {
      tap_(actor_, true, line);
      if (on_line) on_line(std::move(line));
    };
    inner_->open(std::move(handlers));
  }
  void send(std::string line) override {
    tap_(actor_, false, line);
    inner_->send(std::move(line));
  }
  void close() override { inner_->close(); }

 private:
  std::unique_ptr<ClientTransport> inner_;
  std::string actor_;
  World::WireTap tap_;
};

}  // namespace

TransportFactory World::factory_for(const std::string& actor) {
  TransportFactory base = ws_ ? ws_->factory() : net_->factory(actor);
  if (!wire_tap_) return base;
  return [base, actor, tap = wire_tap_](const std::string& origin, const std::string& path) {
    return std::unique_ptr<ClientTransport>(std::make_unique<TappedTransport>(base(origin, path), actor, tap));
  };
}

std::string World::origin_for(const std::string& scheme) const {
  if (live() && scheme == scheme_) return live_origin_;
  if (scheme == "rtclite") return std::string("sim://") + kBrokerHost;
  if (scheme == "sfu") return std::string("sim://") + kSfuHost;
  return {};
}

Connector& World::connector(const std::string& actor, const std::string& scheme) {
  auto it = actors_.find(actor);
  if (it == actors_.end()) throw Error(Errc::param, "unknown actor '" + actor + "'");
  auto& conns = it->second.connectors;
  if (auto c = conns.find(scheme); c != conns.end()) return *c->second;

  std::unique_ptr<Connector> conn;
  if (scheme == "mem") {
    conn = std::make_unique<InMemoryConnector>(*hub_);
  } else if (scheme == "rtclite") {
    conn = std::make_unique<BrokerConnector>(factory_for(actor), origin_for(scheme));
  } else if (scheme == "storage") {
    conn = std::make_unique<StorageConnector>(*storage_);
  } else if (scheme == "sfu") {
    conn = std::make_unique<SfuConnector>(factory_for(actor), actor, origin_for(scheme));
  } else if (scheme == "split") {
    auto& a = connector(actor, "mem");
    auto& b = connector(actor, "rtclite");
    conn = std::make_unique<SplitConnector>(std::vector<Connector*>{&a, &b});
  } else {
    throw Error(Errc::param, "connector '" + scheme + "' is not available");
  }
  return *(conns[scheme] = std::move(conn));
}

EndpointSession& World::session(const std::string& actor, const std::string& stream, const StreamRef& ref,
                                const std::string& scheme) {
  auto key = actor + ":" + stream;
  if (auto it = sessions_.find(key); it != sessions_.end()) return *it->second;
  auto a = actors_.find(actor);
  if (a == actors_.end()) throw Error(Errc::param, "unknown actor '" + actor + "'");
  auto uid = actor + "." + std::to_string(a->second.next_session++);
  auto s = std::make_unique<EndpointSession>(SessionContext{*loop_, *media_, uid},
                                             make_address(scheme, origin_for(scheme), ref));
  s->set_autopause(a->second.options.autopause);
  if (a->second.options.secret) s->set_secret(a->second.options.secret);
  return *(sessions_[key] = std::move(s));
}

EndpointSession* World::find(const std::string& key) {
  auto it = sessions_.find(key);
  return it == sessions_.end() ? nullptr : it->second.get();
}

const EndpointSession* World::find(const std::string& key) const {
  auto it = sessions_.find(key);
  return it == sessions_.end() ? nullptr : it->second.get();
}

std::vector<EndpointSession*> World::sessions_of(const std::string& actor) {
  std::vector<EndpointSession*> out;
  for (auto& [key, s] : sessions_) {
    if (key.compare(0, actor.size() + 1, actor + ":") == 0) out.push_back(s.get());
  }
  return out;
}

std::size_t World::link_count() const {
  std::set<std::string> ids;
  for (const auto& [_, s] : sessions_) {
    for (const auto& l : s->links()) {
      if (l.state == LinkState::connected) ids.insert(l.id);
    }
  }
  return ids.size();
}

std::string World::stream_status(const std::string& name) {
  if (!StreamName::valid(name)) return "idle";
  const StreamName n(name);
  auto from_registry = [&](const StreamRegistry& reg) {
    const auto* rec = reg.find(n);
    return std::string(to_string(rec == nullptr ? StreamStatus::idle : rec->status));
  };
  if (live()) {
    for (const auto& [key, s] : sessions_) {
      if (stream_of_key(key) == name && s->role() == Role::publisher) return "live";
    }
    return "idle";
  }
  if (scheme_ == "rtclite") return from_registry(broker_->registry());
  if (scheme_ == "sfu") return from_registry(sfu_->rooms());
  if (scheme_ == "storage")
    return storage_->get("/streams/" + encode_segment(name) + "/publisher") ? "live" : "idle";
  return from_registry(hub_->registry());
}

std::size_t World::drop_transport(const std::string& actor) {
  if (live()) return 0;
  return net_->drop(actor);
}

void World::restart_broker(Millis down) {
  if (live()) throw Error(Errc::param, "cannot restart a live broker");
  net_->shutdown(kBrokerHost);
  retired_brokers_.push_back(std::move(broker_));
  broker_ = std::make_unique<Broker>(*loop_, Broker::Options{}, &webhooks_);
  loop_->post_after(down, [this] { net_->listen(kBrokerHost, *broker_); });
}

// --- report --------------------------------------------------------------------

std::size_t TopologyReport::stream_count() const {
  return static_cast<std::size_t>(
      std::count_if(streams.begin(), streams.end(), [](const StreamEntry& s) { return !s.publishers.empty(); }));
}

bool TopologyReport::consistent() const {
  return std::all_of(frames.begin(), frames.end(),
                     [](const TrackFrames& f) { return f.delivered + f.dropped <= f.sent; });
}

bool TopologyReport::ok() const {
  return consistent() &&
         std::all_of(assertions.begin(), assertions.end(), [](const ExpectResult& r) { return r.ok; });
}

std::string TopologyReport::to_json() const {
  using ojson = nlohmann::ordered_json;
  ojson j;
  j["seed"] = seed;
  j["connector"] = connector;
  j["time_ms"] = end_time.count();
  j["ok"] = ok();
  j["consistent"] = consistent();
  j["stream_count"] = stream_count();
  j["streams"] = ojson::array();
  for (const auto& s : streams) {
    j["streams"].push_back(
        {{"name", s.name}, {"status", s.status}, {"publishers", s.publishers}, {"subscribers", s.subscribers}});
  }
  j["link_count"] = link_count;
  j["links"] = ojson::array();
  for (const auto& l : links) {
    ojson ends = ojson::object();
    for (const auto& [k, v] : l.ends) ends[k] = v;
    j["links"].push_back({{"id", l.id}, {"connected", l.connected}, {"ends", ends}});
  }
  j["frames"] = ojson::array();
  for (const auto& f : frames) {
    j["frames"].push_back({{"session", f.session},
                           {"track", f.track},
                           {"sent", f.sent},
                           {"delivered", f.delivered},
                           {"dropped", f.dropped}});
  }
  j["assertions"] = ojson::array();
  for (const auto& a : assertions) {
    j["assertions"].push_back({{"at", a.at.count()}, {"expect", a.expect}, {"ok", a.ok}, {"detail", a.detail}});
  }
  j["action_errors"] = action_errors;
  if (!transcripts.empty()) {
    ojson t = ojson::object();
    for (const auto& [k, v] : transcripts) t[k] = v;
    j["transcripts"] = t;
  }
  return j.dump(2) + "\n";
}

std::vector<std::string> subscriber_view(const EndpointSession& session) {
  std::vector<std::string> out;
  for (const auto& e : session.transcript()) {
    if (e.kind == "frame") {
      if (out.empty() || out.back() != "frames") out.emplace_back("frames");
    } else if (e.kind == "connected" || e.kind == "disconnected") {
      out.push_back(e.kind);
    } else if (e.kind == "tracks" || e.kind == "message" || e.kind == "hint") {
      out.push_back(e.kind + " " + e.detail);
    }
  }
  return out;
}

// --- runner --------------------------------------------------------------------

ScenarioRunner::ScenarioRunner(Scenario scenario, Options options)
    : scenario_(std::move(scenario)), options_(options) {
  validate_scenario(scenario_);
  world_ = std::make_unique<World>(scenario_.seed, scenario_.connector, scenario_.frame_loss);
}

ScenarioRunner::~ScenarioRunner() = default;

TopologyReport ScenarioRunner::run() {
  if (ran_) throw Error(Errc::state, "scenario already ran");
  ran_ = true;
  auto& loop = world_->loop();
  const Millis base = loop.now();
  for (const auto& step : scenario_.steps) {
    loop.post_at(base + step.at, [this, &step] { execute(step); });
  }
  loop.run_until(base + scenario_.last_step() + options_.settle);
  return build_report();
}

void ScenarioRunner::execute(const ScenarioStep& step) {
  if (step.action == "expect") {
    assertions_.push_back(evaluate(step));
    return;
  }
  try {
    act(step);
  } catch (const Error& e) {
    action_errors_.push_back(step.str() + ": " + std::string(to_string(e.code())) + ": " + e.what());
  }
}

void ScenarioRunner::act(const ScenarioStep& step) {
  auto& w = *world_;
  const Args args(step.args);
  const auto& a = step.action;

  if (a == "spawn") {
    World::ActorOptions opts;
    opts.autopause = args.flags.count("autopause") != 0;
    if (args.options.count("secret") != 0) opts.secret = args.opt("secret");
    w.spawn(step.actor, std::move(opts));
    return;
  }
  if (a == "restart_broker") {
    w.restart_broker(Millis(args.positional.empty() ? 300 : std::stoll(args.positional[0])));
    return;
  }
  if (a == "drop_transport") {
    w.drop_transport(step.actor);
    return;
  }
  if (a == "pause" || a == "resume") {
    const bool playing = a == "resume";
    if (!args.positional.empty()) {
      auto* s = w.find(step.actor + ":" + args.positional[0]);
      if (s == nullptr) throw Error(Errc::param, "no session: " + step.str());
      s->set_playing(playing);
    } else {
      for (auto* s : w.sessions_of(step.actor)) s->set_playing(playing);
    }
    return;
  }

  const auto& stream = args.at(0, step);
  const auto key = step.actor + ":" + stream;
  const auto scheme = args.opt("via", w.scheme());

  if (a == "publish") {
    auto& s = w.session(step.actor, stream, StreamRef::raw(StreamName(stream)), scheme);
    if (args.options.count("secret") != 0) s.set_secret(args.opt("secret"));
    if (args.options.count("input") != 0) {
      auto* up = w.find(args.opt("input"));
      if (up == nullptr) throw Error(Errc::param, "no upstream session '" + args.opt("input") + "'");
      s.set_input(std::make_shared<RelaySource>(up->remote_media()));
    } else if (!s.local_media()) {
      auto tracks = parse_tracks(args.opt("tracks", "audio:audio,video:video"));
      s.set_input(std::make_shared<SyntheticSource>(std::move(tracks), fnv1a(key, w.seed())));
    }
    if (args.options.count("ping") != 0) s.set_ping(join(split_list(args.opt("ping")), 0));
    s.publish(w.connector(step.actor, scheme));
  } else if (a == "subscribe") {
    const StreamName name(stream);
    auto ref = args.flags.count("hashed") != 0 ? hash_name(name) : StreamRef::raw(name);
    auto& s = w.session(step.actor, stream, ref, scheme);
    if (args.options.count("secret") != 0) s.set_secret(args.opt("secret"));
    s.subscribe(w.connector(step.actor, scheme));
  } else {
    auto* s = w.find(key);
    if (s == nullptr) throw Error(Errc::param, "no session: " + step.str());
    if (a == "stop") {
      s->stop();
    } else if (a == "send") {
      s->send(join(args.positional, 1));
    } else if (a == "mute" || a == "unmute") {
      s->set_muted(a == "mute");
    } else if (a == "add_tracks") {
      s->add_tracks(parse_tracks(args.at(1, step)));
    } else if (a == "remove_tracks") {
      s->remove_tracks(split_list(args.at(1, step)));
    } else {
      throw Error(Errc::param, "unknown action: " + step.str());
    }
  }
}

ExpectResult ScenarioRunner::evaluate(const ScenarioStep& step) {
  auto& w = *world_;
  ExpectResult r;
  r.at = step.at;
  r.expect = join(step.args, 0);
  const auto& args = step.args;
  auto need = [&](std::size_t n) {
    if (args.size() < n) throw Error(Errc::param, "expect needs more arguments");
  };
  auto session = [&](const std::string& key) -> const EndpointSession& {
    const auto* s = w.find(key);
    if (s == nullptr) throw Error(Errc::param, "no session '" + key + "'");
    return *s;
  };

  try {
    need(1);
    const auto& what = args[0];
    if (what == "link-count") {
      need(2);
      auto actual = w.link_count();
      r.ok = actual == std::stoull(args[1]);
      r.detail = "links=" + std::to_string(actual);
    } else if (what == "stream-status") {
      need(3);
      auto actual = w.stream_status(args[1]);
      r.ok = actual == args[2];
      r.detail = "status=" + actual;
    } else if (what == "transcript-contains") {
      need(3);
      const auto& s = session(args[1]);
      auto detail = join(args, 3);
      r.ok = std::any_of(s.transcript().begin(), s.transcript().end(), [&](const TranscriptEntry& e) {
        return e.kind == args[2] && e.detail.find(detail) != std::string::npos;
      });
      r.detail = r.ok ? "found" : "missing";
    } else if (what == "frame-count-range") {
      need(4);
      const auto& s = session(args[1]);
      std::uint64_t count = 0;
      if (s.role() == Role::publisher) {
        for (const auto& [_, n] : s.frames_emitted()) count += n;
      } else {
        count = static_cast<std::uint64_t>(std::count_if(s.transcript().begin(), s.transcript().end(),
                                                         [](const TranscriptEntry& e) { return e.kind == "frame"; }));
      }
      r.ok = count >= std::stoull(args[2]) && count <= std::stoull(args[3]);
      r.detail = "frames=" + std::to_string(count);
    } else if (what == "transcript-order") {
      need(4);
      const auto& t = session(args[1]).transcript();
      auto first = [&](const std::string& pattern) {
        auto it = std::find_if(t.begin(), t.end(), [&](const TranscriptEntry& e) { return entry_matches(e, pattern); });
        return it == t.end() ? -1 : static_cast<long>(it - t.begin());
      };
      auto ia = first(args[2]);
      auto ib = first(args[3]);
      r.ok = ia >= 0 && ib >= 0 && ia < ib;
      r.detail = "first=" + std::to_string(ia) + " second=" + std::to_string(ib);
    } else {
      r.detail = "unknown expectation";
    }
  } catch (const std::exception& e) {
    r.ok = false;
    r.detail = e.what();
  }
  return r;
}

TopologyReport ScenarioRunner::build_report() const {
  auto& w = *world_;
  TopologyReport rep;
  rep.seed = scenario_.seed;
  rep.connector = scenario_.connector;
  rep.end_time = w.loop().now();
  rep.assertions = assertions_;
  rep.action_errors = action_errors_;
  rep.link_count = w.link_count();

  std::map<std::string, TopologyReport::StreamEntry> streams;
  std::map<std::string, TopologyReport::LinkEntry> links;
  std::map<std::string, const EndpointSession*> publisher_of;
  for (const auto& [key, s] : w.sessions()) {
    const auto name = stream_of_key(key);
    if (s->role() == Role::publisher || !s->frames_emitted().empty()) publisher_of.emplace(name, s.get());
    if (s->role() == Role::unset) continue;
    auto& entry = streams[name];
    entry.name = name;
    (s->role() == Role::publisher ? entry.publishers : entry.subscribers).push_back(key);
    for (const auto& l : s->links()) {
      auto& le = links[l.id];
      le.id = l.id;
      le.ends[key] = std::string(to_string(l.state));
      le.connected = le.connected || l.state == LinkState::connected;
    }
  }
  for (auto& [name, entry] : streams) {
    entry.status = w.stream_status(name);
    rep.streams.push_back(std::move(entry));
  }
  for (auto& [_, l] : links) rep.links.push_back(std::move(l));

  for (const auto& [key, s] : w.sessions()) {
    for (const auto& [track, n] : s->frames_emitted()) rep.frames.push_back({key, track, n, 0, 0});
    auto pub = publisher_of.find(stream_of_key(key));
    if (pub == publisher_of.end() || pub->second == s.get()) continue;
    std::set<std::string> labels;
    for (const auto& [track, _] : s->dropped_by_track()) labels.insert(track);
    for (const auto& [track, _] : pub->second->frames_emitted()) labels.insert(track);
    for (const auto& track : labels) {
      TopologyReport::TrackFrames f{key, track, 0, s->remote_media()->delivered(track), 0};
      if (auto it = pub->second->frames_emitted().find(track); it != pub->second->frames_emitted().end()) f.sent = it->second;
      if (auto it = s->dropped_by_track().find(track); it != s->dropped_by_track().end()) f.dropped = it->second;
      if (f.delivered == 0 && f.dropped == 0 && s->role() == Role::unset) continue;
      rep.frames.push_back(f);
    }
  }

  if (options_.transcripts) {
    for (const auto& [key, s] : w.sessions()) {
      auto& lines = rep.transcripts[key];
      for (const auto& e : s->transcript())
        lines.push_back(std::to_string(e.at.count()) + " " + e.kind + (e.detail.empty() ? "" : " " + e.detail));
    }
  }
  return rep;
}

TopologyReport run_scenario(const Scenario& scenario) {
  ScenarioRunner runner(scenario);
  return runner.run();
}

}  // namespace nstream
