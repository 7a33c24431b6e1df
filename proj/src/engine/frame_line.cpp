#include "nstream/engine/frame_line.hpp"

#include <openssl/evp.h>

#include "json.hpp"
#include "nstream/error.hpp"

namespace nstream {

using nlohmann::json;

namespace {
constexpr std::string_view kFramePrefix = "{\"frame\":";
}

bool is_frame_line(std::string_view line) noexcept { return line.substr(0, kFramePrefix.size()) == kFramePrefix; }

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  auto n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw DecodeError(text.size(), "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  auto n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw DecodeError(0, "invalid base64");
  // EVP_DecodeBlock keeps the bytes that padding stands for; drop them.
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string encode_frame_line(const MediaFrame& frame) {
  nlohmann::ordered_json inner;
  inner["stream"] = frame.stream;
  inner["track"] = frame.track_label;
  inner["seq"] = frame.seq;
  inner["ts"] = frame.ts_ms;
  inner["sealed"] = frame.sealed;
  inner["payload"] = base64_encode(frame.payload);
  nlohmann::ordered_json outer;
  outer["frame"] = std::move(inner);
  return outer.dump();
}

MediaFrame decode_frame_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DecodeError(e.byte, "malformed frame line");
  }
  try {
    const auto& f = j.at("frame");
    MediaFrame out;
    out.stream = f.at("stream").get<std::string>();
    out.track_label = f.at("track").get<std::string>();
    out.seq = f.at("seq").get<std::uint64_t>();
    out.ts_ms = f.at("ts").get<std::int64_t>();
    out.sealed = f.at("sealed").get<bool>();
    out.payload = base64_decode(f.at("payload").get<std::string>());
    return out;
  } catch (const json::exception& e) {
    throw DecodeError(0, std::string("bad frame line: ") + e.what());
  }
}

}  // namespace nstream
