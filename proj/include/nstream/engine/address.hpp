#pragma once

#include <map>
#include <string>
#include <string_view>

#include "nstream/core/types.hpp"

namespace nstream {

/// Where a session's stream lives: connector scheme, the locator handed to
/// that connector, the stream reference and any `?key=value` parameters.
///
/// Locators are either URLs (`wss://example.com/str/15`, stream = path) or
/// the connector-local short form `id:<name>?<params>`.
struct StreamAddress {
  std::string connector_scheme;
  std::string locator;
  StreamRef stream;
  std::map<std::string, std::string> params;

  /// `scheme://host[:port]` part of a URL locator; empty for `id:` locators.
  std::string origin() const;
  std::string str() const { return connector_scheme.empty() ? locator : connector_scheme + ":" + locator; }
};

/// Schemes with a connector implementation: rtclite, sfu, storage, mem, split.
bool is_registered_scheme(std::string_view scheme) noexcept;

/// Parses `<scheme>:<locator>` or a bare `id:<name>?<params>`. Throws
/// Errc::parse on unknown schemes or locators without a stream.
StreamAddress parse_address(std::string_view text);

/// Parses a locator for a known scheme.
StreamAddress parse_locator(std::string scheme, std::string_view locator);

/// Builds the address of `stream` under `origin` for `scheme`.
StreamAddress make_address(std::string scheme, const std::string& origin, const StreamRef& stream);

std::string percent_decode(std::string_view text);

}  // namespace nstream
