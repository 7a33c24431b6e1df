#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nstream/engine/address.hpp"
#include "nstream/engine/frame_line.hpp"
#include "nstream/engine/media.hpp"
#include "nstream/engine/media_network.hpp"
#include "nstream/engine/peer_link.hpp"
#include "nstream/engine/sealing.hpp"
#include "nstream/error.hpp"
#include "nstream/runtime/scheduler.hpp"

using namespace nstream;

TEST(PeerLink, OnlyLegalTransitions) {
  const std::vector<LinkState> all{LinkState::fresh, LinkState::offer_sent, LinkState::offer_received,
                                   LinkState::connected, LinkState::closed};
  auto legal = [](LinkState a, LinkState b) {
    if (b == LinkState::closed) return true;
    return (a == LinkState::fresh && (b == LinkState::offer_sent || b == LinkState::offer_received)) ||
           ((a == LinkState::offer_sent || a == LinkState::offer_received) && b == LinkState::connected);
  };
  for (auto a : all) {
    for (auto b : all) {
      EXPECT_EQ(legal_transition(a, b), legal(a, b)) << to_string(a) << " -> " << to_string(b);
    }
  }
  PeerLink link("x#1", EndpointId("peer"));
  link.advance(LinkState::offer_sent);
  EXPECT_THROW(link.advance(LinkState::offer_received), Error);
  link.advance(LinkState::connected);
  link.advance(LinkState::closed);
  EXPECT_EQ(to_string(LinkState::offer_received), "offer-received");
  EXPECT_EQ(to_string(LinkState::fresh), "new");
}

namespace {

MediaFrame sample_frame(std::uint64_t seq) {
  MediaFrame f;
  f.stream = "s1";
  f.track_label = "cam";
  f.seq = seq;
  f.ts_ms = 1000 + static_cast<std::int64_t>(seq) * 50;
  f.payload = SyntheticSource::expected_payload(7, "cam", seq);
  return f;
}

}  // namespace

TEST(Sealing, RoundTripsWithEqualSecrets) {
  FrameSealer a("correct horse"), b("correct horse");
  for (std::uint64_t seq = 0; seq < 50; ++seq) {
    auto plain = sample_frame(seq);
    auto sealed = a.seal(plain);
    EXPECT_TRUE(sealed.sealed);
    EXPECT_NE(sealed.payload, plain.payload);
    EXPECT_EQ(sealed.payload.size(), plain.payload.size() + FrameSealer::kTagBytes);
    auto opened = b.open(sealed);
    EXPECT_EQ(opened.payload, plain.payload);
    EXPECT_FALSE(opened.sealed);
  }
}

TEST(Sealing, WrongSecretOrTamperingFails) {
  FrameSealer a("one"), b("two");
  auto sealed = a.seal(sample_frame(1));
  EXPECT_THROW(b.open(sealed), Error);

  auto flipped = sealed;
  flipped.payload[3] ^= 0x01;
  EXPECT_THROW(a.open(flipped), Error);

  auto moved = sealed;
  moved.seq = 2;
  EXPECT_THROW(a.open(moved), Error);

  auto retimed = sealed;
  retimed.ts_ms += 1;
  EXPECT_THROW(a.open(retimed), Error);

  EXPECT_THROW(a.open(sample_frame(1)), Error);
  try {
    b.open(sealed);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::integrity);
  }
}

TEST(Sealing, SameFrameSealsIdenticallyDifferentSeqDiffers) {
  FrameSealer a("k");
  EXPECT_EQ(a.seal(sample_frame(4)).payload, a.seal(sample_frame(4)).payload);
  auto f = sample_frame(4);
  auto g = f;
  g.seq = 5;
  EXPECT_NE(a.seal(f).payload, a.seal(g).payload);
}

TEST(Base64, KnownVectors) {
  auto bytes = [](std::string_view s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  EXPECT_EQ(base64_encode(bytes("")), "");
  EXPECT_EQ(base64_encode(bytes("f")), "Zg==");
  EXPECT_EQ(base64_encode(bytes("fo")), "Zm8=");
  EXPECT_EQ(base64_encode(bytes("foo")), "Zm9v");
  EXPECT_EQ(base64_encode(bytes("foobar")), "Zm9vYmFy");
  EXPECT_EQ(base64_decode("Zm9vYg=="), bytes("foob"));
  EXPECT_EQ(base64_decode("Zm9vYmE="), bytes("fooba"));
  EXPECT_THROW(base64_decode("Zm9v!"), Error);
}

TEST(FrameLine, RoundTrip) {
  auto f = FrameSealer("k").seal(sample_frame(9));
  auto line = encode_frame_line(f);
  EXPECT_TRUE(is_frame_line(line));
  EXPECT_FALSE(is_frame_line(R"({"v":1,"stream":"*"})"));
  EXPECT_EQ(line.rfind(R"({"frame":{"stream":"s1","track":"cam","seq":9,)", 0), 0u);
  EXPECT_EQ(decode_frame_line(line), f);
  EXPECT_THROW(decode_frame_line(R"({"frame":{"stream":"s1"}})"), Error);
  EXPECT_THROW(decode_frame_line("{\"frame\":"), Error);
}

TEST(SyntheticSource, EmitsReproduciblePayloads) {
  EventLoop loop;
  SyntheticSource src({{TrackKind::audio, "mic", true}, {TrackKind::video, "cam", true}}, 42);
  std::vector<MediaFrame> got;
  src.start(loop, [&](MediaFrame f) { got.push_back(std::move(f)); }, nullptr);
  loop.run_until(Millis(500));
  src.stop();
  loop.run_until(Millis(1000));
  ASSERT_GE(got.size(), 18u);
  ASSERT_LE(got.size(), 22u);
  for (const auto& f : got) {
    EXPECT_EQ(f.payload, SyntheticSource::expected_payload(42, f.track_label, f.seq));
    EXPECT_EQ(f.payload.size(), SyntheticSource::kDefaultFrameBytes);
  }
  EXPECT_NE(SyntheticSource::expected_payload(42, "mic", 0), SyntheticSource::expected_payload(43, "mic", 0));
}

TEST(FileReplaySource, CutsFileIntoFrames) {
  auto path = std::filesystem::temp_directory_path() / "nstream_replay_test.bin";
  {
    std::ofstream out(path, std::ios::binary);
    for (int i = 0; i < 600; ++i) out.put(static_cast<char>(i % 251));
  }
  FileReplaySource src(path, "video", Millis(10), 256);
  EXPECT_EQ(src.frame_count(), 3u);
  EventLoop loop;
  std::vector<MediaFrame> got;
  src.start(loop, [&](MediaFrame f) { got.push_back(std::move(f)); }, nullptr);
  loop.run_until(Millis(200));
  ASSERT_GE(got.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(got[i].payload, src.frame_payload(i));
  EXPECT_EQ(got[2].payload.size(), 600u - 512u);
  std::filesystem::remove(path);
}

TEST(MediaSink, KeepsBoundedRecentFrames) {
  MediaSink sink;
  sink.set_tracks({{TrackKind::video, "cam", true}});
  for (std::uint64_t i = 0; i < 100; ++i) sink.push(sample_frame(i));
  EXPECT_EQ(sink.recent("cam").size(), MediaSink::kBufferPerTrack);
  EXPECT_EQ(sink.recent("cam").front().seq, 36u);
  EXPECT_EQ(sink.delivered("cam"), 100u);
  EXPECT_EQ(sink.delivered_total(), 100u);
}

TEST(RelaySource, KeepsPayloadAndTimestamp) {
  auto upstream = std::make_shared<MediaSink>();
  RelaySource relay(upstream);
  EventLoop loop;
  std::vector<MediaFrame> got;
  std::vector<TrackDescriptor> seen_tracks;
  relay.start(loop, [&](MediaFrame f) { got.push_back(std::move(f)); },
              [&](const std::vector<TrackDescriptor>& t) { seen_tracks = t; });
  upstream->set_tracks({{TrackKind::video, "cam", true}});
  upstream->push(sample_frame(17));
  upstream->push(sample_frame(30));
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].payload, sample_frame(17).payload);
  EXPECT_EQ(got[0].ts_ms, sample_frame(17).ts_ms);
  EXPECT_EQ(got[0].seq, 0u);
  EXPECT_EQ(got[1].seq, 1u);
  EXPECT_EQ(seen_tracks.size(), 1u);
  relay.stop();
  upstream->push(sample_frame(31));
  EXPECT_EQ(got.size(), 2u);
}

TEST(MediaNetwork, FifoPerDirectionWithSeededLatency) {
  EventLoop loop;
  MediaNetwork net(loop, 3);
  std::vector<std::uint64_t> seqs;
  auto to = net.bind([&](const std::string& link, MediaItem item) {
    EXPECT_EQ(link, "L");
    seqs.push_back(std::get<MediaFrame>(item).seq);
  });
  auto from = net.bind([](const std::string&, MediaItem) {});
  auto port = net.port(from, to, "L");
  for (std::uint64_t i = 0; i < 200; ++i) port->send(sample_frame(i));
  loop.run_until(Millis(100));
  ASSERT_EQ(seqs.size(), 200u);
  EXPECT_TRUE(std::is_sorted(seqs.begin(), seqs.end()));
  net.unbind(to);
  port->send(sample_frame(500));
  loop.run_until(Millis(200));
  EXPECT_EQ(seqs.size(), 200u);
}

TEST(MediaNetwork, LossAppliesToFramesOnly) {
  EventLoop loop;
  MediaNetwork net(loop, 3, {Millis(1), Millis(5), 0.5});
  int frames = 0, messages = 0;
  auto to = net.bind([&](const std::string&, MediaItem item) {
    (std::holds_alternative<MediaFrame>(item) ? frames : messages)++;
  });
  auto port = net.port("x", to, "L");
  for (int i = 0; i < 1000; ++i) {
    port->send(sample_frame(static_cast<std::uint64_t>(i)));
    port->send(ChannelMessage{MessageKind::text, "m"});
  }
  loop.run_until(Millis(100));
  EXPECT_EQ(messages, 1000);
  EXPECT_GT(frames, 400);
  EXPECT_LT(frames, 600);
  EXPECT_EQ(net.frames_lost() + static_cast<std::uint64_t>(frames), 1000u);
}

TEST(Address, ParsesUrlAndIdForms) {
  auto a = parse_address("rtclite:wss://example.com/str/15");
  EXPECT_EQ(a.connector_scheme, "rtclite");
  EXPECT_EQ(a.locator, "wss://example.com/str/15");
  EXPECT_EQ(a.stream.str(), "str/15");
  EXPECT_EQ(a.origin(), "wss://example.com");
  EXPECT_EQ(a.str(), "rtclite:wss://example.com/str/15");

  auto b = parse_address("storage:id:1234?config=abc&x=%2F");
  EXPECT_EQ(b.stream.str(), "1234");
  EXPECT_EQ(b.params.at("config"), "abc");
  EXPECT_EQ(b.params.at("x"), "/");
  EXPECT_EQ(b.origin(), "");

  auto c = parse_address("id:room%2F1");
  EXPECT_EQ(c.stream.str(), "room/1");

  auto h = parse_address("rtclite:ws://127.0.0.1:8080/h:7228b70404c9094888a6945cc4cc621ad3cbdaa49a83caf6d119901a22254fb9");
  EXPECT_TRUE(h.stream.is_hashed());
  EXPECT_EQ(h.origin(), "ws://127.0.0.1:8080");

  for (auto bad : {"bogus:wss://x/y", "rtclite:wss://example.com", "rtclite:wss://example.com/", "rtclite:nope",
                   "rtclite:wss:///s"}) {
    try {
      parse_address(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::parse) << bad;
    }
  }
  EXPECT_EQ(make_address("rtclite", "sim://broker", StreamRef::parse("s1")).locator, "sim://broker/s1");
  EXPECT_EQ(make_address("mem", "", StreamRef::parse("s1")).locator, "id:s1");
}
