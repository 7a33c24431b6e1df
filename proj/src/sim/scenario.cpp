#include "nstream/sim/scenario.hpp"

#include <charconv>
#include <set>
#include <sstream>

#include "nstream/error.hpp"

namespace nstream {
namespace {

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw Error(Errc::parse, "line " + std::to_string(line_no) + ": bad number '" + text + "'");
  return value;
}

std::string scheme_of(const std::string& connector) { return connector.substr(0, connector.find(':')); }

void add(Scenario& s, int at, std::string actor, std::string action, std::vector<std::string> args = {}) {
  s.steps.push_back({Millis(at), std::move(actor), std::move(action), std::move(args)});
}

void expect(Scenario& s, int at, std::vector<std::string> args) { add(s, at, "-", "expect", std::move(args)); }

}  // namespace

std::string ScenarioStep::str() const {
  std::string out = "at " + std::to_string(at.count()) + ' ' + actor + ' ' + action;
  for (const auto& a : args) out += ' ' + a;
  return out;
}

std::string Scenario::str() const {
  std::ostringstream out;
  out << "seed " << seed << '\n' << "connector " << connector << '\n';
  if (frame_loss > 0.0) out << "loss " << frame_loss << '\n';
  for (const auto& step : steps) out << step.str() << '\n';
  return out.str();
}

Millis Scenario::last_step() const {
  Millis last{0};
  for (const auto& step : steps) last = std::max(last, step.at);
  return last;
}

Scenario parse_scenario(std::string_view text) {
  Scenario s;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    const auto& head = tok[0];
    if (head == "seed" && tok.size() == 2) {
      s.seed = parse_number<std::uint64_t>(tok[1], line_no);
    } else if (head == "connector" && tok.size() == 2) {
      s.connector = tok[1];
    } else if (head == "loss" && tok.size() == 2) {
      try {
        s.frame_loss = std::stod(tok[1]);
      } catch (const std::exception&) {
        throw Error(Errc::parse, "line " + std::to_string(line_no) + ": bad loss '" + tok[1] + "'");
      }
      if (s.frame_loss < 0.0 || s.frame_loss > 1.0)
        throw Error(Errc::parse, "line " + std::to_string(line_no) + ": loss must be within [0, 1]");
    } else if (head == "at" && tok.size() >= 4) {
      ScenarioStep step;
      step.at = Millis(parse_number<std::int64_t>(tok[1], line_no));
      if (step.at.count() < 0) throw Error(Errc::parse, "line " + std::to_string(line_no) + ": negative time");
      step.actor = tok[2];
      step.action = tok[3];
      step.args.assign(tok.begin() + 4, tok.end());
      s.steps.push_back(std::move(step));
    } else {
      throw Error(Errc::parse, "line " + std::to_string(line_no) + ": cannot parse '" + std::string(line) + "'");
    }
  }
  validate_scenario(s);
  return s;
}

void validate_scenario(const Scenario& scenario) {
  static const std::set<std::string> kActorActions{
      "spawn", "publish", "subscribe", "stop",  "send",   "pause",          "resume",
      "mute",  "unmute",  "add_tracks", "remove_tracks", "drop_transport"};
  static const std::set<std::string> kGlobalActions{"expect", "restart_broker"};

  std::set<std::string> spawned;
  for (const auto& step : scenario.steps) {
    if (step.actor == "-") {
      if (kGlobalActions.count(step.action) == 0)
        throw Error(Errc::param, "'" + step.action + "' needs an actor: " + step.str());
      continue;
    }
    if (kActorActions.count(step.action) == 0) throw Error(Errc::param, "unknown action: " + step.str());
    if (step.action == "spawn") {
      spawned.insert(step.actor);
    } else if (spawned.count(step.actor) == 0) {
      throw Error(Errc::param, "actor '" + step.actor + "' used before spawn: " + step.str());
    }
  }
}

bool is_star_scheme(std::string_view scheme) noexcept { return scheme == "sfu"; }

Scenario build_call(const std::string& a, const std::string& b, const std::string& connector) {
  Scenario s;
  s.connector = connector;
  const auto sa = a + "/out";
  const auto sb = b + "/out";
  add(s, 0, a, "spawn");
  add(s, 0, b, "spawn");
  add(s, 0, a, "publish", {sa});
  add(s, 10, b, "publish", {sb});
  add(s, 100, a, "subscribe", {sb});
  add(s, 110, b, "subscribe", {sa});
  expect(s, 2000, {"link-count", "2"});
  expect(s, 2000, {"stream-status", sa, "live"});
  expect(s, 2000, {"stream-status", sb, "live"});
  expect(s, 2000, {"frame-count-range", a + ":" + sb, "1", "100000"});
  expect(s, 2000, {"frame-count-range", b + ":" + sa, "1", "100000"});
  return s;
}

Scenario build_conference(int n, const std::string& connector) {
  if (n < 2) throw Error(Errc::param, "a conference needs at least 2 endpoints");
  Scenario s;
  s.connector = connector;
  auto actor = [](int i) { return "p" + std::to_string(i); };
  auto stream = [&](int i) { return "room/" + actor(i); };
  for (int i = 0; i < n; ++i) add(s, 0, actor(i), "spawn");
  for (int i = 0; i < n; ++i) add(s, 10 * i, actor(i), "publish", {stream(i)});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) add(s, 200 + 10 * i, actor(i), "subscribe", {stream(j)});
    }
  }
  const int links = is_star_scheme(scheme_of(connector)) ? n : n * (n - 1);
  const int check = 2000 + 20 * n;
  expect(s, check, {"link-count", std::to_string(links)});
  for (int i = 0; i < n; ++i) expect(s, check, {"stream-status", stream(i), "live"});
  return s;
}

int tree_parent(int index, int fanout) { return index == 0 ? -1 : (index - 1) / fanout; }

int tree_size(int depth, int fanout) {
  int total = 0;
  int level = 1;
  for (int d = 0; d <= depth; ++d) {
    total += level;
    level *= fanout;
  }
  return total;
}

Scenario build_broadcast_tree(int depth, int fanout, const std::string& connector) {
  if (depth < 1 || fanout < 1) throw Error(Errc::param, "a broadcast tree needs depth >= 1 and fanout >= 1");
  Scenario s;
  s.connector = connector;
  const int nodes = tree_size(depth, fanout);
  auto actor = [](int i) { return "n" + std::to_string(i); };
  auto stream = [&](int i) { return "tree/" + actor(i); };
  std::vector<int> level(nodes, 0);
  for (int i = 1; i < nodes; ++i) level[i] = level[tree_parent(i, fanout)] + 1;

  for (int i = 0; i < nodes; ++i) add(s, 0, actor(i), "spawn");
  add(s, 0, actor(0), "publish", {stream(0)});
  for (int i = 1; i < nodes; ++i) {
    const int parent = tree_parent(i, fanout);
    const int at = 100 * level[i];
    add(s, at, actor(i), "subscribe", {stream(parent)});
    const bool internal = i * fanout + 1 < nodes;
    if (internal) add(s, at + 50, actor(i), "publish", {stream(i), "input=" + actor(i) + ":" + stream(parent)});
  }
  const int check = 1000 + 200 * depth;
  const int links = is_star_scheme(scheme_of(connector)) ? nodes : nodes - 1;
  expect(s, check, {"link-count", std::to_string(links)});
  for (int i = 0; i < nodes; ++i) {
    if (i * fanout + 1 < nodes) expect(s, check, {"stream-status", stream(i), "live"});
  }
  for (int i = 1; i < nodes; ++i)
    expect(s, check, {"frame-count-range", actor(i) + ":" + stream(tree_parent(i, fanout)), "1", "1000000"});
  return s;
}

Scenario build_canonical(const std::string& connector) {
  Scenario s;
  s.connector = connector;
  add(s, 0, "alice", "spawn", {"autopause"});
  add(s, 0, "bob", "spawn");
  add(s, 0, "carol", "spawn");
  add(s, 0, "alice", "publish", {"s1", "tracks=audio:mic,video:cam"});
  add(s, 100, "bob", "subscribe", {"s1"});
  add(s, 200, "carol", "subscribe", {"s1"});
  add(s, 1000, "alice", "send", {"s1", "hello", "subscribers"});
  add(s, 2000, "bob", "send", {"s1", "hi", "from", "bob"});
  add(s, 2000, "carol", "send", {"s1", "hi", "from", "carol"});
  add(s, 3000, "alice", "pause");
  add(s, 4000, "alice", "resume");
  add(s, 5000, "alice", "add_tracks", {"s1", "video:screen"});
  add(s, 6000, "alice", "remove_tracks", {"s1", "screen"});
  add(s, 7000, "alice", "stop", {"s1"});
  const bool star = is_star_scheme(scheme_of(connector));
  expect(s, 2500, {"link-count", star ? "3" : "2"});
  expect(s, 2500, {"stream-status", "s1", "live"});
  expect(s, 2500, {"transcript-contains", "bob:s1", "message", "hello", "subscribers"});
  expect(s, 2500, {"transcript-contains", "carol:s1", "message", "hello", "subscribers"});
  expect(s, 2500, {"transcript-contains", "alice:s1", "message", "hi", "from", "bob"});
  expect(s, 2500, {"transcript-contains", "alice:s1", "message", "hi", "from", "carol"});
  expect(s, 8000, {"transcript-order", "bob:s1", "hint=pause", "hint=play"});
  expect(s, 8000, {"transcript-order", "carol:s1", "connected", "disconnected"});
  expect(s, 8000, {"frame-count-range", "bob:s1", "1", "1000000"});
  expect(s, 8000, {"stream-status", "s1", "idle"});
  return s;
}

}  // namespace nstream
