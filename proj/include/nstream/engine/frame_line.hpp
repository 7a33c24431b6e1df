#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "nstream/engine/media.hpp"

namespace nstream {

// Media frames on a line transport, as used between endpoints and the SFU:
// {"frame":{"stream":..,"track":..,"seq":..,"ts":..,"sealed":..,"payload":"<base64>"}}

bool is_frame_line(std::string_view line) noexcept;
std::string encode_frame_line(const MediaFrame& frame);
/// Throws DecodeError on malformed input.
MediaFrame decode_frame_line(std::string_view line);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace nstream
