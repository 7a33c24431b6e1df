#pragma once

#include <array>
#include <string_view>

#include "nstream/engine/media.hpp"

namespace nstream {

/// End-to-end frame protection keyed by a shared secret.
///
/// Key = HKDF-SHA256(secret). Payloads are sealed with AES-256-GCM; the
/// nonce is derived from (track label, seq) and the label, seq and
/// timestamp are authenticated, so a relay can forward sealed frames
/// without being able to read or alter them.
class FrameSealer {
 public:
  static constexpr std::size_t kTagBytes = 16;

  explicit FrameSealer(std::string_view secret);

  MediaFrame seal(MediaFrame frame) const;
  /// Throws Errc::integrity on key mismatch, tampering, or an unsealed frame.
  MediaFrame open(MediaFrame frame) const;

 private:
  std::array<unsigned char, 32> key_{};
};

MediaFrame seal_frame(MediaFrame frame, std::string_view secret);
MediaFrame open_frame(MediaFrame frame, std::string_view secret);

}  // namespace nstream
