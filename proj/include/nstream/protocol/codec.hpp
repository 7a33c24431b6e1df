#pragma once

#include <string>
#include <string_view>

#include "nstream/protocol/envelope.hpp"

namespace nstream {

/// Canonical single-line JSON. Field order is fixed:
/// `v, stream, from, to, kind, seq, payload`; `to` is omitted when absent.
/// Throws Errc::validation for envelopes that cannot be put on the wire.
std::string encode(const SignalEnvelope& env);

/// Strict inverse of encode(). Unknown or duplicate fields and trailing
/// garbage are rejected with DecodeError (carrying the byte offset);
/// v != 1 raises Errc::version and an unknown kind Errc::kind.
SignalEnvelope decode(std::string_view bytes);

}  // namespace nstream
