#include "nstream/error.hpp"

#include <array>
#include <utility>

namespace nstream {
namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 17> kNames{{
    {Errc::validation, "ValidationError"},
    {Errc::publisher_conflict, "PublisherConflict"},
    {Errc::decode, "DecodeError"},
    {Errc::version, "VersionError"},
    {Errc::kind, "KindError"},
    {Errc::membership, "MembershipError"},
    {Errc::role, "RoleError"},
    {Errc::stream_unknown, "StreamUnknown"},
    {Errc::link_unknown, "LinkUnknown"},
    {Errc::state, "StateError"},
    {Errc::track_unknown, "TrackUnknown"},
    {Errc::integrity, "IntegrityError"},
    {Errc::param, "ParamError"},
    {Errc::parse, "ParseError"},
    {Errc::transport, "TransportError"},
    {Errc::overflow, "overflow"},
    {Errc::unauthorized, "Unauthorized"},
}};

}  // namespace

std::string_view to_string(Errc code) noexcept {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

Errc errc_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  throw Error(Errc::validation, "unknown error code: " + std::string(name));
}

}  // namespace nstream
