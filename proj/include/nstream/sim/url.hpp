#pragma once

#include <string>
#include <string_view>

#include "nstream/engine/address.hpp"

namespace nstream {

enum class UrlMode { publish, subscribe };
std::string_view to_string(UrlMode mode) noexcept;

/// A `web+ezpub:` or `web+ezsub:` link, e.g.
/// `web+ezpub:rtclite:wss://example.com/str/15`.
struct StreamUrl {
  UrlMode mode = UrlMode::publish;
  std::string scheme;
  std::string locator;
  std::string stream;

  StreamAddress address() const;
  bool operator==(const StreamUrl&) const = default;
};

/// Throws Errc::parse for an unknown prefix, an unregistered connector
/// scheme or a locator without a stream.
StreamUrl parse_stream_url(std::string_view text);

}  // namespace nstream
