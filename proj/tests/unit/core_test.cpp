#include <gtest/gtest.h>

#include <optional>
#include <set>

#include "generators.hpp"
#include "nstream/core/stream_record.hpp"
#include "nstream/core/types.hpp"
#include "nstream/error.hpp"
#include "nstream/runtime/scheduler.hpp"

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

}  // namespace

// Digests computed with python hashlib before the implementation existed.
TEST(HashName, MatchesFrozenDigests) {
  EXPECT_EQ(hash_name(StreamName("str/15")).str(),
            "h:7228b70404c9094888a6945cc4cc621ad3cbdaa49a83caf6d119901a22254fb9");
  EXPECT_EQ(hash_name(StreamName("s1")).str(), "h:e8bc163c82eee18733288c7d4ac636db3a6deb013ef2d37b68322be20edc45cc");
  EXPECT_EQ(hash_name(StreamName("a/b/c")).str(),
            "h:d76a7b72669c9cec266b566bdec68efbc8d4f22d1f2689bbf0146bf0b88fdbe9");
  EXPECT_EQ(hash_name(StreamName("\xc3\xa9/x")).str(),
            "h:ea5d2314ec4e1e6930d21075200af59e2add0f2bb1451e36c7e188c92845e101");
}

TEST(HashName, IsHashedAndDistinct) {
  testgen::Gen g(1);
  std::set<std::string> seen;
  for (int i = 0; i < 500; ++i) {
    auto name = g.stream_name();
    auto ref = hash_name(StreamName(name));
    EXPECT_TRUE(ref.is_hashed());
    EXPECT_EQ(ref.str().size(), 66u);
    seen.insert(name + "=" + ref.str());
  }
  std::set<std::string> digests;
  for (const auto& s : seen) digests.insert(s.substr(s.find('=') + 1));
  std::set<std::string> names;
  for (const auto& s : seen) names.insert(s.substr(0, s.find('=')));
  EXPECT_EQ(digests.size(), names.size());
}

TEST(StreamName, Validation) {
  EXPECT_TRUE(StreamName::valid("str/15"));
  EXPECT_TRUE(StreamName::valid("a"));
  EXPECT_TRUE(StreamName::valid(std::string(256, 'x')));
  EXPECT_FALSE(StreamName::valid(std::string(257, 'x')));
  EXPECT_FALSE(StreamName::valid(""));
  EXPECT_FALSE(StreamName::valid("/lead"));
  EXPECT_FALSE(StreamName::valid("trail/"));
  EXPECT_FALSE(StreamName::valid("has space"));
  EXPECT_FALSE(StreamName::valid("tab\there"));
  EXPECT_FALSE(StreamName::valid("*"));
  EXPECT_FALSE(StreamName::valid("h:abc"));
  EXPECT_FALSE(StreamName::valid(std::string("nul\0x", 5)));
  EXPECT_EQ(code_of([] { StreamName("bad name"); }), Errc::validation);
}

TEST(StreamRef, ParsesBothForms) {
  auto raw = StreamRef::parse("str/15");
  EXPECT_FALSE(raw.is_hashed());
  EXPECT_EQ(raw.name().str(), "str/15");

  auto hashed = StreamRef::parse("h:7228b70404c9094888a6945cc4cc621ad3cbdaa49a83caf6d119901a22254fb9");
  EXPECT_TRUE(hashed.is_hashed());
  EXPECT_EQ(hashed, hash_name(StreamName("str/15")));
  EXPECT_EQ(code_of([&] { hashed.name(); }), Errc::validation);

  EXPECT_EQ(code_of([] { StreamRef::parse("h:ABC"); }), Errc::validation);
  EXPECT_EQ(code_of([] { StreamRef::parse("h:" + std::string(64, 'G')); }), Errc::validation);
  EXPECT_EQ(code_of([] { StreamRef::parse("h:" + std::string(64, 'A')); }), Errc::validation);
}

TEST(Tracks, KindsAndUniqueLabels) {
  EXPECT_EQ(track_kind_from_string("audio"), TrackKind::audio);
  EXPECT_EQ(to_string(TrackKind::data), "data");
  EXPECT_EQ(code_of([] { track_kind_from_string("smell"); }), Errc::validation);
  EXPECT_NO_THROW(require_unique_labels({{TrackKind::audio, "a"}, {TrackKind::video, "b"}}));
  EXPECT_EQ(code_of([] { require_unique_labels({{TrackKind::audio, "a"}, {TrackKind::video, "a"}}); }),
            Errc::validation);
}

TEST(StreamRecord, PublisherSlotIsExclusive) {
  StreamRecord rec(StreamName("s1"));
  EndpointId a("a"), b("b");
  rec = attach_publisher(rec, a);
  EXPECT_EQ(rec.status, StreamStatus::live);
  EXPECT_EQ(attach_publisher(rec, a), rec);
  EXPECT_EQ(code_of([&] { attach_publisher(rec, b); }), Errc::publisher_conflict);
}

TEST(StreamRecord, SubscribersWaitWhileIdle) {
  StreamRecord rec(StreamName("s1"));
  EndpointId p("p"), s1("s1"), s2("s2");
  rec = attach_subscriber(rec, s1);
  rec = attach_subscriber(rec, s1);
  EXPECT_EQ(rec.subscribers.size(), 1u);
  EXPECT_EQ(rec.status, StreamStatus::idle);
  rec = attach_publisher(rec, p);
  rec = attach_subscriber(rec, s2);
  rec = set_tracks(rec, {{TrackKind::video, "cam"}});
  rec = detach(rec, p);
  EXPECT_EQ(rec.status, StreamStatus::idle);
  EXPECT_TRUE(rec.tracks.empty());
  EXPECT_EQ(rec.subscribers, (std::set<EndpointId>{s1, s2}));
  EXPECT_EQ(detach(rec, EndpointId("nobody")), rec);
  EXPECT_EQ(code_of([&] { set_tracks(rec, {}); }), Errc::role);
}

TEST(StreamRecord, SetTracksRejectsDuplicateLabels) {
  auto rec = attach_publisher(StreamRecord(StreamName("s1")), EndpointId("p"));
  EXPECT_EQ(code_of([&] { set_tracks(rec, {{TrackKind::video, "x"}, {TrackKind::audio, "x"}}); }),
            Errc::validation);
}

// Random transition sequences checked against a tiny model of the record.
TEST(StreamRecord, RandomTransitionsKeepInvariants) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    testgen::Gen g(seed);
    StreamRecord rec(StreamName("s"));
    std::optional<std::string> model_pub;
    std::set<std::string> model_subs;
    for (int step = 0; step < 40; ++step) {
      std::string who = "e" + std::to_string(g.range(0, 4));
      EndpointId ep(who);
      switch (g.range(0, 2)) {
        case 0: {
          bool conflict = model_pub && *model_pub != who;
          bool is_sub = model_subs.count(who) != 0;
          if (conflict) {
            EXPECT_EQ(code_of([&] { attach_publisher(rec, ep); }), Errc::publisher_conflict);
          } else if (!is_sub) {
            rec = attach_publisher(rec, ep);
            model_pub = who;
          }
          break;
        }
        case 1:
          if (model_pub != who) {
            rec = attach_subscriber(rec, ep);
            model_subs.insert(who);
          }
          break;
        default:
          rec = detach(rec, ep);
          if (model_pub == who) model_pub.reset();
          model_subs.erase(who);
          break;
      }
      ASSERT_NO_THROW(check_invariants(rec)) << "seed " << seed;
      ASSERT_EQ(rec.publisher.has_value(), model_pub.has_value());
      if (model_pub) ASSERT_EQ(rec.publisher->str(), *model_pub);
      ASSERT_EQ(rec.subscribers.size(), model_subs.size());
      ASSERT_EQ(rec.status == StreamStatus::live, model_pub.has_value());
    }
  }
}

TEST(StreamRegistry, ResolvesHashesAndCollectsIdle) {
  StreamRegistry reg;
  Millis t0{0};
  StreamName name("str/15");
  reg.ensure(name, t0);
  reg.store(attach_publisher(*reg.find(name), EndpointId("p")), t0);
  EXPECT_EQ(reg.resolve(hash_name(name)), name);
  EXPECT_EQ(reg.resolve(StreamRef::raw(name)), name);
  EXPECT_EQ(reg.resolve(hash_name(StreamName("other"))), std::nullopt);
  EXPECT_TRUE(reg.audit().empty());

  reg.store(detach(*reg.find(name), EndpointId("p")), Millis(1000));
  EXPECT_EQ(reg.collect_idle(Millis(1500), Millis(1000)), 0u);
  EXPECT_EQ(reg.collect_idle(Millis(2000), Millis(1000)), 1u);
  EXPECT_EQ(reg.find(name), nullptr);
  EXPECT_EQ(reg.resolve(hash_name(name)), std::nullopt);
}
