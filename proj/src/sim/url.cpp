#include "nstream/sim/url.hpp"

#include "nstream/error.hpp"

namespace nstream {

std::string_view to_string(UrlMode mode) noexcept {
  return mode == UrlMode::publish ? "publish" : "subscribe";
}

StreamAddress StreamUrl::address() const { return parse_locator(scheme, locator); }

StreamUrl parse_stream_url(std::string_view text) {
  constexpr std::string_view kPub = "web+ezpub:";
  constexpr std::string_view kSub = "web+ezsub:";
  StreamUrl url;
  if (text.starts_with(kPub)) {
    url.mode = UrlMode::publish;
    text.remove_prefix(kPub.size());
  } else if (text.starts_with(kSub)) {
    url.mode = UrlMode::subscribe;
    text.remove_prefix(kSub.size());
  } else {
    throw Error(Errc::parse, "expected web+ezpub: or web+ezsub: prefix");
  }

  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error(Errc::parse, "missing connector scheme");
  url.scheme = std::string(text.substr(0, colon));
  if (!is_registered_scheme(url.scheme)) throw Error(Errc::parse, "unknown scheme '" + url.scheme + "'");
  url.locator = std::string(text.substr(colon + 1));
  if (url.locator.empty()) throw Error(Errc::parse, "empty locator");
  url.stream = parse_locator(url.scheme, url.locator).stream.str();
  return url;
}

}  // namespace nstream
