#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace nstream {

/// Name of a unidirectional media stream, e.g. "str/15".
///
/// 1..256 bytes, no whitespace or control characters, `/` allowed as a
/// hierarchy separator but not at either end. `*` is reserved for
/// session-scope envelopes and names starting with `h:` would be ambiguous
/// with hashed references, so both are rejected.
class StreamName {
 public:
  static constexpr std::size_t kMaxBytes = 256;

  explicit StreamName(std::string raw);

  static bool valid(std::string_view raw) noexcept;

  const std::string& str() const noexcept { return raw_; }
  auto operator<=>(const StreamName&) const = default;

 private:
  std::string raw_;
};

/// Opaque identity of one connected session. Never empty.
class EndpointId {
 public:
  explicit EndpointId(std::string id);

  const std::string& str() const noexcept { return id_; }
  auto operator<=>(const EndpointId&) const = default;

 private:
  std::string id_;
};

/// A stream reference as written by a client: either a raw name or the
/// `h:<64 lowercase hex>` digest form.
class StreamRef {
 public:
  static constexpr std::string_view kHashPrefix = "h:";
  static constexpr std::size_t kDigestChars = 64;

  static StreamRef raw(StreamName name);
  static StreamRef hashed(std::string hex_digest);
  /// Accepts either form; throws Errc::validation.
  static StreamRef parse(std::string_view text);

  bool is_hashed() const noexcept { return hashed_; }
  /// Full textual form (`str/15` or `h:...`).
  const std::string& str() const noexcept { return text_; }
  /// Raw name; only meaningful when !is_hashed().
  StreamName name() const;

  auto operator<=>(const StreamRef&) const = default;

 private:
  StreamRef(bool hashed, std::string text) : hashed_(hashed), text_(std::move(text)) {}
  bool hashed_;
  std::string text_;
};

/// SHA-256 over the UTF-8 bytes of the name, lowercase hex, `h:` prefix.
StreamRef hash_name(const StreamName& name);

enum class TrackKind { audio, video, data };

std::string_view to_string(TrackKind kind) noexcept;
TrackKind track_kind_from_string(std::string_view text);

struct TrackDescriptor {
  TrackKind kind = TrackKind::video;
  std::string label;
  bool enabled = true;

  bool operator==(const TrackDescriptor&) const = default;
};

/// Throws Errc::validation when two descriptors share a label.
void require_unique_labels(const std::vector<TrackDescriptor>& tracks);

}  // namespace nstream

template <>
struct std::hash<nstream::EndpointId> {
  std::size_t operator()(const nstream::EndpointId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};

template <>
struct std::hash<nstream::StreamName> {
  std::size_t operator()(const nstream::StreamName& n) const noexcept {
    return std::hash<std::string>{}(n.str());
  }
};
