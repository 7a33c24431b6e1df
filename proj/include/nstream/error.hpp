#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nstream {

enum class Errc {
  validation,
  publisher_conflict,
  decode,
  version,
  kind,
  membership,
  role,
  stream_unknown,
  link_unknown,
  state,
  track_unknown,
  integrity,
  param,
  parse,
  transport,
  overflow,
  unauthorized,
};

/// Wire name of an error code, as carried in ERROR envelope payloads.
std::string_view to_string(Errc code) noexcept;
Errc errc_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Malformed wire input; offset is the byte position where parsing failed.
class DecodeError : public Error {
 public:
  DecodeError(std::size_t offset, const std::string& what)
      : Error(Errc::decode, what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace nstream
