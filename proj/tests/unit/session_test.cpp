#include <gtest/gtest.h>

#include "json.hpp"
#include "nstream/connectors/in_memory.hpp"
#include "nstream/engine/session.hpp"
#include "nstream/error.hpp"

using namespace nstream;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::validation;
}

std::size_t count(const EndpointSession& s, const std::string& kind) {
  return static_cast<std::size_t>(std::count_if(s.transcript().begin(), s.transcript().end(),
                                                [&](const TranscriptEntry& e) { return e.kind == kind; }));
}

std::vector<TrackDescriptor> av() { return {{TrackKind::audio, "mic", true}, {TrackKind::video, "cam", true}}; }

// Two sessions wired point-to-point: each one's signaling output is fed to
// the other, as an application would do over its own channel.
struct P2P {
  EventLoop loop;
  MediaNetwork media{loop, 1};
  EndpointSession pub{{loop, media, "pub.1"}, make_address("", "", StreamRef::parse("s1"))};
  EndpointSession sub{{loop, media, "sub.1"}, make_address("", "", StreamRef::parse("s1"))};
  std::vector<std::string> to_sub, to_pub;

  P2P() {
    pub.on_data([this](std::string d) {
      to_sub.push_back(d);
      loop.post([this, d] { sub.apply(d); });
    });
    sub.on_data([this](std::string d) {
      to_pub.push_back(d);
      loop.post([this, d] { pub.apply(d); });
    });
    pub.set_input(std::make_shared<SyntheticSource>(av(), 9));
  }
};

}  // namespace

TEST(Session, PointToPointConnectsAndDelivers) {
  P2P p;
  p.sub.subscribe();
  p.pub.publish();
  p.loop.run_until(Millis(1000));
  EXPECT_EQ(p.pub.open_link_count(), 1u);
  EXPECT_EQ(p.sub.open_link_count(), 1u);
  EXPECT_EQ(p.pub.links()[0].id, p.sub.links()[0].id);
  EXPECT_EQ(p.sub.remote_media()->tracks(), av());
  EXPECT_GT(p.sub.remote_media()->delivered("cam"), 15u);
  for (const auto& f : p.sub.remote_media()->recent("cam"))
    EXPECT_EQ(f.payload, SyntheticSource::expected_payload(9, "cam", f.seq));

  ASSERT_FALSE(p.to_sub.empty());
  auto offer = nlohmann::json::parse(p.to_sub[0]);
  EXPECT_EQ(offer["type"], "offer");
  EXPECT_EQ(offer["link"], p.pub.links()[0].id);
  EXPECT_EQ(nlohmann::json::parse(p.to_pub[0])["type"], "answer");
  EXPECT_EQ(nlohmann::json::parse(p.to_pub[1])["type"], "candidate");
}

TEST(Session, DuplicateOfferIgnoredConflictingOfferRejected) {
  P2P p;
  p.sub.subscribe();
  p.pub.publish();
  p.loop.run_until(Millis(100));
  ASSERT_EQ(count(p.sub, "connected"), 1u);
  EXPECT_NO_THROW(p.sub.apply(p.to_sub[0]));
  EXPECT_EQ(count(p.sub, "connected"), 1u);

  auto altered = nlohmann::json::parse(p.to_sub[0]);
  altered["addr"] = "elsewhere";
  EXPECT_EQ(code_of([&] { p.sub.apply(altered.dump()); }), Errc::state);
}

TEST(Session, SignalingErrors) {
  P2P p;
  p.sub.subscribe();
  EXPECT_EQ(code_of([&] { p.sub.apply(R"({"link":"zz","type":"answer"})"); }), Errc::state);
  EXPECT_EQ(code_of([&] { p.sub.apply(R"({"link":"zz","type":"candidate"})"); }), Errc::link_unknown);
  EXPECT_EQ(code_of([&] { p.sub.apply("not json"); }), Errc::validation);
  EXPECT_EQ(code_of([&] { p.sub.apply(R"({"link":"zz"})"); }), Errc::validation);

  p.pub.publish();
  EXPECT_EQ(code_of([&] { p.pub.apply(R"({"link":"zz","type":"answer"})"); }), Errc::link_unknown);
  EXPECT_EQ(code_of([&] { p.pub.apply(R"({"link":"x","type":"offer"})"); }), Errc::state);
}

TEST(Session, RoleRules) {
  EventLoop loop;
  MediaNetwork media(loop, 1);
  EndpointSession s({loop, media, "x.1"}, make_address("", "", StreamRef::parse("s1")));
  EXPECT_EQ(code_of([&] { s.send("hi"); }), Errc::role);
  EXPECT_EQ(code_of([&] { s.add_tracks({}); }), Errc::role);
  EXPECT_EQ(code_of([&] { s.publish(); }), Errc::state);
  s.subscribe();
  EXPECT_EQ(s.role(), Role::subscriber);
  EXPECT_EQ(code_of([&] { s.subscribe(); }), Errc::role);
  EXPECT_EQ(code_of([&] { s.set_input(std::make_shared<SyntheticSource>(av(), 1)); }), Errc::role);
  s.stop();
  EXPECT_EQ(s.role(), Role::unset);
  s.set_input(std::make_shared<SyntheticSource>(av(), 1));
  s.publish();
  EXPECT_EQ(code_of([&] { s.remove_tracks({"nope"}); }), Errc::track_unknown);
  EXPECT_EQ(code_of([&] { s.add_tracks({{TrackKind::video, "cam", true}}); }), Errc::validation);
  s.add_tracks({{TrackKind::data, "chat", true}});
  EXPECT_EQ(s.tracks().size(), 3u);
  s.remove_tracks({"chat", "mic"});
  EXPECT_EQ(s.tracks(), (std::vector<TrackDescriptor>{{TrackKind::video, "cam", true}}));
}

TEST(Session, TextQueuedUntilLinkConnects) {
  P2P p;
  std::vector<std::string> got;
  p.sub.on_message([&](const std::string& m) { got.push_back(m); });
  p.pub.publish();
  p.pub.send("early 1");
  p.pub.send("early 2");
  EXPECT_TRUE(p.pub.channel());
  p.loop.run_until(Millis(50));
  p.sub.subscribe();
  p.sub.apply(p.to_sub[0]);
  p.loop.run_until(Millis(500));
  EXPECT_EQ(got, (std::vector<std::string>{"early 1", "early 2"}));
}

TEST(Session, AutopauseHintsBracketTheGap) {
  P2P p;
  p.pub.set_autopause(true);
  p.sub.subscribe();
  p.pub.publish();
  p.loop.run_until(Millis(500));
  p.pub.set_playing(false);
  p.loop.run_until(Millis(1000));
  p.pub.set_playing(true);
  p.loop.run_until(Millis(1500));

  const auto& t = p.sub.transcript();
  auto pause = std::find_if(t.begin(), t.end(), [](const TranscriptEntry& e) { return e.kind == "hint"; });
  ASSERT_NE(pause, t.end());
  EXPECT_EQ(pause->detail, "pause");
  auto play = std::find_if(pause + 1, t.end(), [](const TranscriptEntry& e) { return e.kind == "hint"; });
  ASSERT_NE(play, t.end());
  EXPECT_EQ(play->detail, "play");
  EXPECT_TRUE(std::none_of(pause, play, [](const TranscriptEntry& e) { return e.kind == "frame"; }));
  EXPECT_TRUE(std::any_of(play, t.end(), [](const TranscriptEntry& e) { return e.kind == "frame"; }));
}

TEST(Session, NoHintsWithoutAutopause) {
  P2P p;
  p.sub.subscribe();
  p.pub.publish();
  p.loop.run_until(Millis(300));
  p.pub.set_playing(false);
  p.loop.run_until(Millis(600));
  p.pub.set_playing(true);
  p.loop.run_until(Millis(900));
  EXPECT_EQ(count(p.sub, "hint"), 0u);
}

TEST(Session, FramesForUnknownTracksWaitForDescriptors) {
  P2P p;
  p.sub.subscribe();
  p.pub.publish();
  p.loop.run_until(Millis(200));
  p.pub.add_tracks({{TrackKind::video, "screen", true}});
  p.loop.run_until(Millis(600));
  // Without a connector nobody announces the new track; its frames wait.
  EXPECT_EQ(p.sub.remote_media()->delivered("screen"), 0u);
  p.sub.remote_tracks_added({{TrackKind::video, "screen", true}});
  EXPECT_GT(p.sub.remote_media()->delivered("screen"), 5u);
  EXPECT_LE(p.sub.remote_media()->delivered("screen"), EndpointSession::kPendingFramesPerTrack);

  p.sub.remote_tracks_removed({"screen"});
  auto before = p.sub.remote_media()->delivered("screen");
  p.loop.run_until(Millis(900));
  EXPECT_EQ(p.sub.remote_media()->delivered("screen"), before);
}

TEST(Session, MuteDisablesAudioFrames) {
  P2P p;
  p.sub.subscribe();
  p.pub.publish();
  p.loop.run_until(Millis(300));
  p.pub.set_muted(true);
  EXPECT_FALSE(p.pub.tracks()[0].enabled);
  p.loop.run_until(Millis(350));
  auto mic = p.sub.remote_media()->delivered("mic");
  auto cam = p.sub.remote_media()->delivered("cam");
  p.loop.run_until(Millis(800));
  EXPECT_EQ(p.sub.remote_media()->delivered("mic"), mic);
  EXPECT_GT(p.sub.remote_media()->delivered("cam"), cam);
}

TEST(Session, SealedFramesNeedTheSameSecret) {
  P2P good;
  good.pub.set_secret("s3cret");
  good.sub.set_secret("s3cret");
  good.sub.subscribe();
  good.pub.publish();
  good.loop.run_until(Millis(500));
  EXPECT_GT(good.sub.remote_media()->delivered_total(), 10u);
  for (const auto& f : good.sub.remote_media()->recent("mic"))
    EXPECT_EQ(f.payload, SyntheticSource::expected_payload(9, "mic", f.seq));
  EXPECT_EQ(good.sub.integrity_errors(), 0u);

  P2P bad;
  bad.pub.set_secret("s3cret");
  bad.sub.set_secret("other");
  bad.sub.subscribe();
  bad.pub.publish();
  bad.loop.run_until(Millis(500));
  bad.pub.set_playing(false);
  bad.loop.run_until(Millis(700));
  EXPECT_EQ(bad.sub.remote_media()->delivered_total(), 0u);
  EXPECT_EQ(bad.sub.integrity_errors(), bad.pub.links()[0].frames_sent);
  EXPECT_GT(bad.sub.integrity_errors(), 10u);

  P2P none;
  none.pub.set_secret("s3cret");
  none.sub.subscribe();
  none.pub.publish();
  none.loop.run_until(Millis(300));
  EXPECT_EQ(none.sub.remote_media()->delivered_total(), 0u);
  EXPECT_GT(none.sub.integrity_errors(), 0u);
}

TEST(Session, FatalServiceErrorResetsRole) {
  EventLoop loop;
  MediaNetwork media(loop, 1);
  InMemoryHub hub(loop);
  InMemoryConnector c1(hub), c2(hub);
  EndpointSession a({loop, media, "a.1"}, make_address("mem", "", StreamRef::parse("s1")));
  EndpointSession b({loop, media, "b.1"}, make_address("mem", "", StreamRef::parse("s1")));
  a.set_input(std::make_shared<SyntheticSource>(av(), 1));
  b.set_input(std::make_shared<SyntheticSource>(av(), 2));
  a.publish(c1);
  loop.run_until(Millis(50));
  b.publish(c2);
  loop.run_until(Millis(100));
  EXPECT_EQ(a.role(), Role::publisher);
  EXPECT_EQ(b.role(), Role::unset);
  ASSERT_TRUE(b.last_error().has_value());
  EXPECT_EQ(b.last_error()->code(), Errc::publisher_conflict);
  EXPECT_EQ(count(b, "error"), 1u);

  b.service_error(Error(Errc::overflow, "not fatal"));
  EXPECT_EQ(b.last_error()->code(), Errc::overflow);
}
