#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nstream/sim/world.hpp"

using namespace nstream;

namespace {

Scenario load(const std::string& file) {
  std::ifstream in(std::filesystem::path(NSTREAM_SCENARIO_DIR) / file);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

void expect_all_ok(const TopologyReport& r) {
  EXPECT_TRUE(r.action_errors.empty()) << (r.action_errors.empty() ? "" : r.action_errors.front());
  for (const auto& a : r.assertions) EXPECT_TRUE(a.ok) << a.at.count() << "ms " << a.expect << ": " << a.detail;
  EXPECT_TRUE(r.consistent());
}

const std::vector<std::string> kConnectors{"mem", "rtclite", "storage", "sfu"};

bool star(const std::string& c) { return c == "sfu"; }

}  // namespace

TEST(ScenarioFiles, Canonical) { expect_all_ok(run_scenario(load("canonical.scn"))); }

TEST(ScenarioFiles, PublisherDropRecovers) {
  auto r = run_scenario(load("publisher_drop.scn"));
  expect_all_ok(r);
  EXPECT_EQ(r.link_count, 2u);
}

TEST(ScenarioFiles, BrokerRestartRebuildsTheCall) {
  auto r = run_scenario(load("broker_restart.scn"));
  expect_all_ok(r);
  EXPECT_EQ(r.stream_count(), 2u);
}

TEST(ScenarioFiles, FailingExpectationIsReported) {
  auto r = run_scenario(load("failing_expect.scn"));
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(std::any_of(r.assertions.begin(), r.assertions.end(), [](const auto& a) { return !a.ok; }));
}

class Topologies : public ::testing::TestWithParam<std::string> {};

TEST_P(Topologies, Call) {
  auto r = run_scenario(build_call("a", "b", GetParam()));
  expect_all_ok(r);
  EXPECT_EQ(r.stream_count(), 2u);
  EXPECT_EQ(r.link_count, 2u);
}

TEST_P(Topologies, Conferences) {
  for (int n : {2, 3, 4}) {
    auto r = run_scenario(build_conference(n, GetParam()));
    expect_all_ok(r);
    EXPECT_EQ(r.stream_count(), static_cast<std::size_t>(n));
    EXPECT_EQ(r.link_count, static_cast<std::size_t>(star(GetParam()) ? n : n * (n - 1))) << n;
  }
}

TEST_P(Topologies, BroadcastTrees) {
  for (auto [depth, fanout] : {std::pair{1, 2}, {2, 2}, {2, 3}, {3, 2}}) {
    auto r = run_scenario(build_broadcast_tree(depth, fanout, GetParam()));
    expect_all_ok(r);
    auto nodes = tree_size(depth, fanout);
    EXPECT_EQ(r.link_count, static_cast<std::size_t>(star(GetParam()) ? nodes : nodes - 1))
        << depth << "x" << fanout;
  }
}

TEST_P(Topologies, CanonicalSession) {
  auto r = run_scenario(build_canonical(GetParam()));
  expect_all_ok(r);
}

INSTANTIATE_TEST_SUITE_P(All, Topologies, ::testing::ValuesIn(kConnectors));

TEST(Topologies, SplitCallUsesBothChildren) {
  auto r = run_scenario(build_call("a", "b", "split"));
  expect_all_ok(r);
  EXPECT_EQ(r.stream_count(), 2u);
}

TEST(Faults, LossyMediaStaysConsistent) {
  for (double loss : {0.05, 0.3}) {
    auto s = build_conference(3, "rtclite");
    s.frame_loss = loss;
    auto r = run_scenario(s);
    EXPECT_TRUE(r.consistent());
    std::uint64_t sent = 0, delivered = 0;
    for (const auto& f : r.frames) {
      if (f.delivered == 0 && f.dropped == 0) continue;
      sent += f.sent;
      delivered += f.delivered;
    }
    EXPECT_LT(delivered, sent);
    EXPECT_GT(delivered, sent / 2);
  }
}

TEST(Faults, SubscriberDropReconnects) {
  auto s = build_call("a", "b", "rtclite");
  s.steps.push_back({Millis(2500), "b", "drop_transport", {}});
  s.steps.push_back({Millis(6000), "-", "expect", {"link-count", "2"}});
  auto r = run_scenario(s);
  expect_all_ok(r);
}

TEST(Faults, ManySeedsStayConsistent) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (const auto& c : kConnectors) {
      auto s = build_conference(3, c);
      s.seed = seed;
      s.frame_loss = 0.1;
      auto r = run_scenario(s);
      EXPECT_TRUE(r.consistent()) << c << " seed " << seed;
      EXPECT_TRUE(r.action_errors.empty()) << c << " seed " << seed;
    }
  }
}
