#include <gtest/gtest.h>

#include "nstream/error.hpp"
#include "nstream/sim/scenario.hpp"
#include "nstream/sim/url.hpp"
#include "nstream/sim/world.hpp"

using namespace nstream;

TEST(StreamUrl, PublishLink) {
  auto u = parse_stream_url("web+ezpub:rtclite:wss://example.com/str/15");
  EXPECT_EQ(u, (StreamUrl{UrlMode::publish, "rtclite", "wss://example.com/str/15", "str/15"}));
  auto addr = u.address();
  EXPECT_EQ(addr.connector_scheme, "rtclite");
  EXPECT_EQ(addr.stream.str(), "str/15");
}

TEST(StreamUrl, SubscribeLink) {
  auto u = parse_stream_url("web+ezsub:rtclite:wss://example.com/str/15");
  EXPECT_EQ(u, (StreamUrl{UrlMode::subscribe, "rtclite", "wss://example.com/str/15", "str/15"}));
  EXPECT_EQ(parse_stream_url("web+ezsub:storage:id:1234?config=x").stream, "1234");
}

TEST(StreamUrl, Rejections) {
  for (auto bad : {"web+ezpub:bogus:wss://example.com/str/15", "web+ezfoo:rtclite:wss://example.com/str/15",
                   "rtclite:wss://example.com/str/15", "web+ezpub:rtclite", "web+ezpub:rtclite:",
                   "web+ezpub:rtclite:wss://example.com/", "Web+ezpub:rtclite:wss://example.com/s"}) {
    try {
      parse_stream_url(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::parse) << bad;
    }
  }
}

TEST(ScenarioText, ParsesAndPrintsBack) {
  const char* text = R"(# comment line
seed 42
connector sfu
loss 0.25
at 0 alice spawn autopause   # trailing comment
at 0 alice publish s1 tracks=audio:mic
at 120 bob spawn
at 120 bob subscribe s1 hashed
at 900 - expect link-count 2
)";
  auto s = parse_scenario(text);
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.connector, "sfu");
  EXPECT_DOUBLE_EQ(s.frame_loss, 0.25);
  ASSERT_EQ(s.steps.size(), 5u);
  EXPECT_EQ(s.steps[1].args, (std::vector<std::string>{"s1", "tracks=audio:mic"}));
  EXPECT_EQ(s.steps[4].actor, "-");
  EXPECT_EQ(s.last_step(), Millis(900));
  EXPECT_EQ(parse_scenario(s.str()), s);
}

TEST(ScenarioText, Rejections) {
  auto code = [](const std::string& text) {
    try {
      parse_scenario(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::validation;
  };
  EXPECT_EQ(code("at 0 bob publish s1\n"), Errc::param);
  EXPECT_EQ(code("at 0 bob spawn\nat 0 bob dance\n"), Errc::param);
  EXPECT_EQ(code("at 0 - publish s1\n"), Errc::param);
  EXPECT_EQ(code("at x bob spawn\n"), Errc::parse);
  EXPECT_EQ(code("at -5 bob spawn\n"), Errc::parse);
  EXPECT_EQ(code("seed\n"), Errc::parse);
  EXPECT_EQ(code("loss 2\n"), Errc::parse);
  EXPECT_EQ(code("hello world\n"), Errc::parse);
}

TEST(Builders, Shapes) {
  EXPECT_THROW(build_conference(1), Error);
  EXPECT_THROW(build_broadcast_tree(0, 2), Error);
  EXPECT_THROW(build_broadcast_tree(2, 0), Error);
  EXPECT_EQ(tree_size(2, 2), 7);
  EXPECT_EQ(tree_size(4, 3), 121);
  EXPECT_EQ(tree_size(3, 1), 4);
  EXPECT_EQ(tree_parent(0, 3), -1);
  EXPECT_EQ(tree_parent(5, 2), 2);
  EXPECT_EQ(tree_parent(12, 3), 3);

  auto call = build_call("a", "b");
  EXPECT_NO_THROW(validate_scenario(call));
  auto publishes = std::count_if(call.steps.begin(), call.steps.end(), [](auto& s) { return s.action == "publish"; });
  EXPECT_EQ(publishes, 2);

  auto tree = build_broadcast_tree(2, 2);
  auto tree_pubs = std::count_if(tree.steps.begin(), tree.steps.end(), [](auto& s) { return s.action == "publish"; });
  EXPECT_EQ(tree_pubs, 3);
}

TEST(Builders, ConferenceOfTwoMatchesCallShape) {
  auto conf = run_scenario(build_conference(2));
  auto call = run_scenario(build_call("p0", "p1"));
  EXPECT_TRUE(conf.ok());
  EXPECT_TRUE(call.ok());
  EXPECT_EQ(conf.stream_count(), call.stream_count());
  EXPECT_EQ(conf.link_count, call.link_count);
}

TEST(Runner, SameSeedSameReport) {
  for (const std::string c : {"mem", "rtclite", "storage", "sfu", "split"}) {
    auto a = run_scenario(build_canonical(c)).to_json();
    auto b = run_scenario(build_canonical(c)).to_json();
    EXPECT_EQ(a, b) << c;
  }
  auto s = build_conference(3, "rtclite");
  s.seed = 2;
  auto other = run_scenario(s).to_json();
  s.seed = 3;
  EXPECT_NE(run_scenario(s).to_json(), other);
}

TEST(Runner, UnknownConnectorIsASetupError) {
  Scenario s = build_call("a", "b", "carrier-pigeon");
  try {
    run_scenario(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::param);
  }
  s.connector = "storage:ws://127.0.0.1:1";
  EXPECT_THROW(run_scenario(s), Error);
}

TEST(Runner, ActionErrorsAreReportedNotThrown) {
  auto s = parse_scenario(R"(
at 0 a spawn
at 0 a send s1 hello
at 0 a publish bad/
at 10 a stop s1
)");
  auto r = run_scenario(s);
  EXPECT_EQ(r.action_errors.size(), 3u);
  EXPECT_TRUE(r.ok());
}

TEST(Runner, ExpectationKinds) {
  auto s = parse_scenario(R"(
at 0 a spawn
at 0 b spawn
at 0 a publish s1
at 50 b subscribe s1
at 1000 - expect link-count 1
at 1000 - expect stream-status s1 live
at 1000 - expect stream-status nothing idle
at 1000 - expect transcript-contains b:s1 tracks video:video
at 1000 - expect frame-count-range b:s1 10 100
at 1000 - expect frame-count-range a:s1 10 100
at 1000 - expect transcript-order b:s1 tracks connected
at 1000 - expect transcript-order b:s1 connected tracks
at 1000 - expect frame-count-range nobody:s1 0 1
at 1000 - expect smell-check
)");
  auto r = run_scenario(s);
  ASSERT_EQ(r.assertions.size(), 10u);
  std::vector<bool> ok;
  for (const auto& a : r.assertions) ok.push_back(a.ok);
  EXPECT_EQ(ok, (std::vector<bool>{true, true, true, true, true, true, true, false, false, false}));
  EXPECT_FALSE(r.ok());
}

TEST(Report, JsonCarriesTopology) {
  ScenarioRunner runner(build_call("a", "b"), {Millis(1000), true});
  auto r = runner.run();
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.consistent());
  EXPECT_EQ(r.streams.size(), 2u);
  EXPECT_EQ(r.streams[0].name, "a/out");
  EXPECT_EQ(r.streams[0].publishers, std::vector<std::string>{"a:a/out"});
  EXPECT_EQ(r.streams[0].subscribers, std::vector<std::string>{"b:a/out"});
  EXPECT_EQ(r.links.size(), 2u);
  for (const auto& l : r.links) EXPECT_EQ(l.ends.size(), 2u);
  auto json = r.to_json();
  EXPECT_NE(json.find("\"link_count\": 2"), std::string::npos);
  EXPECT_NE(json.find("\"transcripts\""), std::string::npos);
  for (const auto& f : r.frames) EXPECT_LE(f.delivered + f.dropped, f.sent) << f.session << " " << f.track;
}
