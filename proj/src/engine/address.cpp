#include "nstream/engine/address.hpp"

#include <array>

#include "nstream/error.hpp"

namespace nstream {
namespace {

constexpr std::array<std::string_view, 5> kSchemes{"rtclite", "sfu", "storage", "mem", "split"};

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::map<std::string, std::string> parse_query(std::string_view query) {
  std::map<std::string, std::string> out;
  while (!query.empty()) {
    auto amp = query.find('&');
    auto pair = query.substr(0, amp);
    query = amp == std::string_view::npos ? std::string_view{} : query.substr(amp + 1);
    if (pair.empty()) continue;
    auto eq = pair.find('=');
    auto key = percent_decode(pair.substr(0, eq));
    auto value = eq == std::string_view::npos ? std::string{} : percent_decode(pair.substr(eq + 1));
    out[key] = value;
  }
  return out;
}

StreamRef parse_stream_part(std::string_view text) {
  try {
    return StreamRef::parse(percent_decode(text));
  } catch (const Error& e) {
    throw Error(Errc::parse, "bad stream in locator: " + std::string(e.what()));
  }
}

}  // namespace

std::string percent_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '%' && i + 2 < text.size()) {
      int hi = hex_value(text[i + 1]);
      int lo = hex_value(text[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(text[i]);
  }
  return out;
}

std::string StreamAddress::origin() const {
  auto sep = locator.find("://");
  if (sep == std::string::npos) return {};
  auto slash = locator.find_first_of("/?", sep + 3);
  return locator.substr(0, slash);
}

bool is_registered_scheme(std::string_view scheme) noexcept {
  for (auto s : kSchemes) {
    if (s == scheme) return true;
  }
  return false;
}

StreamAddress parse_locator(std::string scheme, std::string_view locator) {
  StreamAddress addr{std::move(scheme), std::string(locator), StreamRef::hashed(std::string(64, '0')), {}};
  auto qpos = locator.find('?');
  auto head = locator.substr(0, qpos);
  if (qpos != std::string_view::npos) addr.params = parse_query(locator.substr(qpos + 1));

  if (head.starts_with("id:")) {
    addr.stream = parse_stream_part(head.substr(3));
    return addr;
  }
  auto sep = head.find("://");
  if (sep == std::string_view::npos || sep == 0) throw Error(Errc::parse, "locator is neither a URL nor id:<name>");
  auto path_start = head.find('/', sep + 3);
  if (path_start == std::string_view::npos || path_start + 1 >= head.size())
    throw Error(Errc::parse, "locator has no stream path");
  if (path_start == sep + 3) throw Error(Errc::parse, "locator has no host");
  addr.stream = parse_stream_part(head.substr(path_start + 1));
  return addr;
}

StreamAddress parse_address(std::string_view text) {
  if (text.starts_with("id:")) return parse_locator("", text);
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw Error(Errc::parse, "address needs <scheme>:<locator>");
  auto scheme = text.substr(0, colon);
  if (!is_registered_scheme(scheme)) throw Error(Errc::parse, "unknown connector scheme '" + std::string(scheme) + "'");
  return parse_locator(std::string(scheme), text.substr(colon + 1));
}

StreamAddress make_address(std::string scheme, const std::string& origin, const StreamRef& stream) {
  StreamAddress addr{std::move(scheme), {}, stream, {}};
  addr.locator = origin.empty() ? "id:" + stream.str() : origin + "/" + stream.str();
  return addr;
}

}  // namespace nstream
