#include "nstream/core/types.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <set>

#include "nstream/error.hpp"

namespace nstream {
namespace {

bool is_lower_hex(char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); }

}  // namespace

StreamName::StreamName(std::string raw) : raw_(std::move(raw)) {
  if (!valid(raw_)) throw Error(Errc::validation, "invalid stream name");
}

bool StreamName::valid(std::string_view raw) noexcept {
  if (raw.empty() || raw.size() > kMaxBytes) return false;
  if (raw.front() == '/' || raw.back() == '/') return false;
  if (raw == "*" || raw.starts_with(StreamRef::kHashPrefix)) return false;
  // Bytes >= 0x80 are accepted so UTF-8 names pass; everything at or below
  // space, and DEL, is rejected.
  return std::none_of(raw.begin(), raw.end(), [](char ch) {
    auto c = static_cast<unsigned char>(ch);
    return c <= 0x20 || c == 0x7f;
  });
}

EndpointId::EndpointId(std::string id) : id_(std::move(id)) {
  if (id_.empty()) throw Error(Errc::validation, "empty endpoint id");
}

StreamRef StreamRef::raw(StreamName name) { return StreamRef(false, name.str()); }

StreamRef StreamRef::hashed(std::string hex_digest) {
  if (hex_digest.size() != kDigestChars || !std::all_of(hex_digest.begin(), hex_digest.end(), is_lower_hex))
    throw Error(Errc::validation, "hashed ref must be 64 lowercase hex characters");
  return StreamRef(true, std::string(kHashPrefix) + hex_digest);
}

StreamRef StreamRef::parse(std::string_view text) {
  if (text.starts_with(kHashPrefix)) return hashed(std::string(text.substr(kHashPrefix.size())));
  return raw(StreamName(std::string(text)));
}

StreamName StreamRef::name() const {
  if (hashed_) throw Error(Errc::validation, "hashed ref has no raw name");
  return StreamName(text_);
}

StreamRef hash_name(const StreamName& name) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(name.str().data(), name.str().size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(Errc::validation, "sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0x0f]);
  }
  return StreamRef::hashed(std::move(hex));
}

std::string_view to_string(TrackKind kind) noexcept {
  switch (kind) {
    case TrackKind::audio: return "audio";
    case TrackKind::video: return "video";
    case TrackKind::data: return "data";
  }
  return "video";
}

TrackKind track_kind_from_string(std::string_view text) {
  if (text == "audio") return TrackKind::audio;
  if (text == "video") return TrackKind::video;
  if (text == "data") return TrackKind::data;
  throw Error(Errc::validation, "unknown track kind: " + std::string(text));
}

void require_unique_labels(const std::vector<TrackDescriptor>& tracks) {
  std::set<std::string_view> seen;
  for (const auto& t : tracks) {
    if (t.label.empty()) throw Error(Errc::validation, "empty track label");
    if (!seen.insert(t.label).second) throw Error(Errc::validation, "duplicate track label: " + t.label);
  }
}

}  // namespace nstream
