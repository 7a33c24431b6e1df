#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nstream/runtime/scheduler.hpp"

namespace nstream {

/// One timed action: `at <ms> <actor> <action> <args...>`. Global actions
/// (restart_broker, expect) use the actor `-`.
struct ScenarioStep {
  Millis at{0};
  std::string actor;
  std::string action;
  std::vector<std::string> args;

  std::string str() const;
  bool operator==(const ScenarioStep&) const = default;
};

/// A scripted run. Text form:
///
///   seed 7
///   connector mem            (or rtclite, storage, sfu, split, rtclite:ws://host:port)
///   loss 0.05                (optional frame loss on the media plane)
///   at 0 alice spawn autopause
///   at 0 alice publish s1 tracks=audio:mic,video:cam
///   at 100 bob subscribe s1 hashed
///   at 2000 - expect link-count 1
///
/// `#` starts a comment. Steps keep file order among equal timestamps.
struct Scenario {
  std::uint64_t seed = 1;
  std::string connector = "mem";
  double frame_loss = 0.0;
  std::vector<ScenarioStep> steps;

  std::string str() const;
  Millis last_step() const;
  bool operator==(const Scenario&) const = default;
};

/// Throws Errc::parse on malformed lines and Errc::param when a step names
/// an actor that has not been spawned earlier in the script.
Scenario parse_scenario(std::string_view text);
void validate_scenario(const Scenario& scenario);

/// Connector schemes whose media goes through a server (one link per
/// endpoint) rather than a mesh (one link per publisher/subscriber pair).
bool is_star_scheme(std::string_view scheme) noexcept;

/// a publishes `<a>/out` and subscribes `<b>/out`, and the other way round.
Scenario build_call(const std::string& a, const std::string& b, const std::string& connector = "mem");
/// Endpoints p0..p<n-1>; each publishes `room/p<i>` and subscribes to the
/// other n-1 streams. Throws Errc::param for n < 2.
Scenario build_conference(int n, const std::string& connector = "mem");
/// Node n0 publishes; every other node subscribes to its parent's stream
/// and, when it has children, republishes it. Nodes are numbered
/// breadth-first. Throws Errc::param unless depth >= 1 and fanout >= 1.
Scenario build_broadcast_tree(int depth, int fanout, const std::string& connector = "mem");
/// One publisher, two subscribers, text both ways, pause/resume,
/// add/remove track, stop. Events are about a second apart.
Scenario build_canonical(const std::string& connector = "mem");

/// Parent of breadth-first node `index` in a tree of the given fanout.
int tree_parent(int index, int fanout);
/// Number of nodes in a full tree.
int tree_size(int depth, int fanout);

}  // namespace nstream
