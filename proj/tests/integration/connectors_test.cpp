#include <gtest/gtest.h>

#include <filesystem>

#include "nstream/connectors/broker_connector.hpp"
#include "nstream/connectors/split.hpp"
#include "nstream/connectors/storage.hpp"
#include "nstream/error.hpp"
#include "nstream/sim/world.hpp"

using namespace nstream;

namespace {

std::vector<TrackDescriptor> av() { return {{TrackKind::audio, "mic", true}, {TrackKind::video, "cam", true}}; }

std::size_t count(const EndpointSession& s, const std::string& kind, const std::string& detail = {}) {
  return static_cast<std::size_t>(std::count_if(s.transcript().begin(), s.transcript().end(), [&](const auto& e) {
    return e.kind == kind && (detail.empty() || e.detail == detail);
  }));
}

EndpointSession& publisher(World& w, const std::string& actor, const std::string& stream, const std::string& scheme,
                           std::uint64_t seed = 1) {
  auto& s = w.session(actor, stream, StreamRef::parse(stream), scheme);
  s.set_input(std::make_shared<SyntheticSource>(av(), seed));
  s.publish(w.connector(actor, scheme));
  return s;
}

EndpointSession& subscriber(World& w, const std::string& actor, const std::string& stream, const std::string& scheme,
                            bool hashed = false) {
  auto ref = hashed ? hash_name(StreamName(stream)) : StreamRef::parse(stream);
  auto& s = w.session(actor, stream, ref, scheme);
  s.subscribe(w.connector(actor, scheme));
  return s;
}

class EveryConnector : public ::testing::TestWithParam<std::string> {};

}  // namespace

TEST_P(EveryConnector, SubscribeBeforePublishConverges) {
  World w(7, GetParam());
  w.spawn("p");
  w.spawn("s");
  auto& sub = subscriber(w, "s", "early", GetParam());
  w.loop().run_until(Millis(500));
  EXPECT_EQ(sub.open_link_count(), 0u);
  EXPECT_EQ(w.stream_status("early"), "idle");
  publisher(w, "p", "early", GetParam());
  w.loop().run_until(Millis(1500));
  EXPECT_EQ(sub.open_link_count(), 1u);
  EXPECT_EQ(w.stream_status("early"), "live");
  EXPECT_GT(sub.remote_media()->delivered_total(), 10u);
}

TEST_P(EveryConnector, SecondPublisherGetsConflict) {
  World w(7, GetParam());
  w.spawn("a");
  w.spawn("b");
  auto& a = publisher(w, "a", "s1", GetParam());
  w.loop().run_until(Millis(200));
  auto& b = publisher(w, "b", "s1", GetParam());
  w.loop().run_until(Millis(600));
  EXPECT_EQ(a.role(), Role::publisher);
  EXPECT_EQ(b.role(), Role::unset);
  ASSERT_TRUE(b.last_error());
  EXPECT_EQ(b.last_error()->code(), Errc::publisher_conflict);
}

TEST_P(EveryConnector, TextBothWaysExactlyOnce) {
  World w(9, GetParam());
  w.spawn("p");
  w.spawn("s");
  auto& pub = publisher(w, "p", "chat", GetParam());
  auto& sub = subscriber(w, "s", "chat", GetParam());
  w.loop().run_until(Millis(500));
  for (int i = 0; i < 20; ++i) {
    pub.send("down " + std::to_string(i));
    sub.send("up " + std::to_string(i));
  }
  w.loop().run_until(Millis(1500));
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(count(sub, "message", "down " + std::to_string(i)), 1u);
    EXPECT_EQ(count(pub, "message", "up " + std::to_string(i)), 1u);
  }
}

TEST_P(EveryConnector, TrackChangesReachSubscribers) {
  World w(3, GetParam());
  w.spawn("p");
  w.spawn("s");
  auto& pub = publisher(w, "p", "s1", GetParam());
  auto& sub = subscriber(w, "s", "s1", GetParam());
  w.loop().run_until(Millis(500));
  pub.add_tracks({{TrackKind::video, "screen", true}});
  w.loop().run_until(Millis(1000));
  EXPECT_EQ(sub.remote_media()->tracks().size(), 3u);
  EXPECT_GT(sub.remote_media()->delivered("screen"), 3u);
  pub.remove_tracks({"mic"});
  w.loop().run_until(Millis(1500));
  EXPECT_EQ(sub.remote_media()->tracks().size(), 2u);
  pub.set_muted(true);
  w.loop().run_until(Millis(1800));
  pub.add_tracks({{TrackKind::audio, "mic2", true}});
  w.loop().run_until(Millis(2000));
  auto tracks = sub.remote_media()->tracks();
  ASSERT_EQ(tracks.size(), 3u);
}

TEST_P(EveryConnector, StopLeavesSubscribersPending) {
  World w(5, GetParam());
  w.spawn("p");
  w.spawn("s");
  auto& pub = publisher(w, "p", "s1", GetParam());
  auto& sub = subscriber(w, "s", "s1", GetParam());
  w.loop().run_until(Millis(500));
  pub.stop();
  w.loop().run_until(Millis(1000));
  EXPECT_EQ(sub.role(), Role::subscriber);
  EXPECT_EQ(sub.open_link_count(), 0u);
  EXPECT_FALSE(sub.last_error());
  EXPECT_EQ(count(sub, "disconnected"), 1u);
  pub.publish(w.connector("p", GetParam()));
  w.loop().run_until(Millis(2000));
  EXPECT_EQ(sub.open_link_count(), 1u);
}

INSTANTIATE_TEST_SUITE_P(Connectors, EveryConnector, ::testing::Values("mem", "rtclite", "storage", "sfu"));

TEST(InMemory, HashedSubscribeToUnknownStreamFails) {
  World w(1, "mem");
  w.spawn("s");
  auto& sub = subscriber(w, "s", "ghost", "mem", true);
  w.loop().run_until(Millis(100));
  ASSERT_TRUE(sub.last_error());
  EXPECT_EQ(sub.last_error()->code(), Errc::stream_unknown);
  EXPECT_EQ(sub.role(), Role::unset);
}

TEST(Storage, DuplicateNotificationsAreIgnored) {
  EventLoop loop;
  MediaNetwork media(loop, 1);
  MemoryStorage storage(loop, {Millis(2), 0.5, 77});
  StorageConnector c1(storage), c2(storage);
  EndpointSession pub({loop, media, "p.1"}, make_address("storage", "", StreamRef::parse("s1")));
  EndpointSession sub({loop, media, "s.1"}, make_address("storage", "", StreamRef::parse("s1")));
  pub.set_input(std::make_shared<SyntheticSource>(av(), 1));
  pub.publish(c1);
  sub.subscribe(c2);
  loop.run_until(Millis(500));
  for (int i = 0; i < 10; ++i) sub.send("m" + std::to_string(i));
  loop.run_until(Millis(1000));
  EXPECT_GT(storage.duplicates_sent(), 0u);
  EXPECT_GT(c1.duplicates_ignored() + c2.duplicates_ignored(), 0u);
  EXPECT_EQ(sub.open_link_count(), 1u);
  EXPECT_EQ(count(sub, "connected"), 1u);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(count(pub, "message", "m" + std::to_string(i)), 1u);
}

TEST(Storage, TwoFileBackedInstancesHandshake) {
  auto root = std::filesystem::temp_directory_path() / ("nstream_fs_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  {
    EventLoop loop;
    MediaNetwork media(loop, 1);
    FileStorage fs1(loop, root, Millis(20));
    FileStorage fs2(loop, root, Millis(20));
    StorageConnector c1(fs1, "one"), c2(fs2, "two");
    EndpointSession pub({loop, media, "p.1"}, make_address("storage", "", StreamRef::parse("room/1")));
    EndpointSession sub({loop, media, "s.1"}, make_address("storage", "", hash_name(StreamName("room/1"))));
    pub.set_input(std::make_shared<SyntheticSource>(av(), 1));
    pub.publish(c1);
    loop.run_until(Millis(100));
    sub.subscribe(c2);
    loop.run_until(Millis(1000));
    EXPECT_EQ(sub.open_link_count(), 1u);
    EXPECT_GT(sub.remote_media()->delivered_total(), 5u);
    EXPECT_TRUE(fs1.get("/streams/room%2F1/publisher").has_value());
    EXPECT_EQ(fs2.get("/hashes/" + hash_name(StreamName("room/1")).str().substr(2)), "room/1");

    FileStorage fs3(loop, root, Millis(20));
    StorageConnector c3(fs3, "three");
    EndpointSession rival({loop, media, "r.1"}, make_address("storage", "", StreamRef::parse("room/1")));
    rival.set_input(std::make_shared<SyntheticSource>(av(), 2));
    rival.publish(c3);
    loop.run_until(Millis(1200));
    ASSERT_TRUE(rival.last_error());
    EXPECT_EQ(rival.last_error()->code(), Errc::publisher_conflict);

    pub.stop();
    loop.run_until(Millis(1600));
    EXPECT_FALSE(fs2.get("/streams/room%2F1/publisher").has_value());
    EXPECT_EQ(sub.open_link_count(), 0u);
  }
  std::filesystem::remove_all(root);
}

TEST(Storage, EncodesSegments) {
  EXPECT_EQ(encode_segment("s1"), "s1");
  EXPECT_EQ(encode_segment("a/b"), "a%2Fb");
  EXPECT_EQ(encode_segment("100%/x"), "100%25%2Fx");
}

TEST(Sfu, OneLinkPerEndpointAndFramesForwarded) {
  World w(4, "sfu");
  for (int i = 0; i < 3; ++i) w.spawn("p" + std::to_string(i));
  for (int i = 0; i < 3; ++i) publisher(w, "p" + std::to_string(i), "room/p" + std::to_string(i), "sfu", i + 1);
  w.loop().run_until(Millis(100));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) subscriber(w, "p" + std::to_string(i), "room/p" + std::to_string(j), "sfu");
  w.loop().run_until(Millis(1500));
  EXPECT_EQ(w.link_count(), 3u);
  EXPECT_EQ(w.sfu().endpoint_links(), 3u);
  EXPECT_GT(w.sfu().frames_forwarded(), w.sfu().frames_in());
  for (const auto& [key, s] : w.sessions()) {
    if (s->role() == Role::subscriber) EXPECT_GT(s->remote_media()->delivered_total(), 20u) << key;
  }
}

TEST(Split, PartialFailureKeepsOtherChild) {
  World w(2, "split");
  w.spawn("squatter");
  w.spawn("p");
  w.spawn("s");
  publisher(w, "squatter", "s1", "rtclite");
  w.loop().run_until(Millis(300));
  auto& pub = publisher(w, "p", "s1", "split");
  auto& sub = subscriber(w, "s", "s1", "mem");
  w.loop().run_until(Millis(1200));
  auto& split = dynamic_cast<SplitConnector&>(w.connector("p", "split"));
  EXPECT_EQ(split.status(pub), SplitConnector::Status::partial);
  EXPECT_EQ(split.child_status(pub),
            (std::vector<SplitConnector::ChildStatus>{SplitConnector::ChildStatus::ok,
                                                      SplitConnector::ChildStatus::failed}));
  EXPECT_EQ(pub.role(), Role::publisher);
  EXPECT_FALSE(pub.last_error());
  EXPECT_EQ(sub.open_link_count(), 1u);
  EXPECT_GT(sub.remote_media()->delivered_total(), 10u);
  EXPECT_EQ(to_string(SplitConnector::Status::partial), "partial");
}

TEST(Split, BothChildrenReceive) {
  World w(2, "split");
  w.spawn("p");
  w.spawn("m");
  w.spawn("r");
  publisher(w, "p", "s1", "split");
  w.loop().run_until(Millis(300));
  auto& via_mem = subscriber(w, "m", "s1", "mem");
  auto& via_broker = subscriber(w, "r", "s1", "rtclite", true);
  w.loop().run_until(Millis(1300));
  EXPECT_EQ(via_mem.open_link_count(), 1u);
  EXPECT_EQ(via_broker.open_link_count(), 1u);
  EXPECT_GT(via_broker.remote_media()->delivered_total(), 10u);
}

TEST(Split, NeedsTwoChildren) {
  EventLoop loop;
  InMemoryHub hub(loop);
  InMemoryConnector only(hub);
  EXPECT_THROW(SplitConnector({&only}), Error);
}

TEST(BrokerConnector, ReconnectsAfterDrop) {
  World w(6, "rtclite");
  w.spawn("p");
  w.spawn("s");
  auto& pub = publisher(w, "p", "s1", "rtclite");
  auto& sub = subscriber(w, "s", "s1", "rtclite");
  w.loop().run_until(Millis(500));
  ASSERT_EQ(sub.open_link_count(), 1u);
  EXPECT_EQ(w.drop_transport("p"), 1u);
  w.loop().run_until(Millis(600));
  EXPECT_EQ(sub.open_link_count(), 0u);
  w.loop().run_until(Millis(2000));
  EXPECT_EQ(sub.open_link_count(), 1u);
  EXPECT_EQ(pub.open_link_count(), 1u);
  EXPECT_EQ(dynamic_cast<BrokerConnector&>(w.connector("p", "rtclite")).reconnects(), 1u);
}

TEST(BrokerConnector, GivesUpAfterRetryBudget) {
  World w(6, "rtclite");
  w.spawn("p");
  auto& pub = publisher(w, "p", "s1", "rtclite");
  w.loop().run_until(Millis(300));
  w.network().shutdown("broker");
  w.loop().run_until(Millis(1000));
  EXPECT_EQ(pub.role(), Role::publisher);
  w.loop().run_until(Millis(10000));
  ASSERT_TRUE(pub.last_error());
  EXPECT_EQ(pub.last_error()->code(), Errc::transport);
  EXPECT_EQ(pub.role(), Role::unset);
}
