#include "nstream/protocol/codec.hpp"

#include <set>

#include "json.hpp"
#include "nstream/error.hpp"

namespace nstream {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::set<std::string, std::less<>> kFields{"v", "stream", "from", "to", "kind", "seq", "payload"};

std::optional<StreamRef> parse_stream_field(const std::string& text) {
  if (text == SignalEnvelope::kSessionScope) return std::nullopt;
  return StreamRef::parse(text);
}

const json& field(const json& obj, const char* name) {
  auto it = obj.find(name);
  if (it == obj.end()) throw DecodeError(0, std::string("missing field '") + name + "'");
  return *it;
}

}  // namespace

std::string encode(const SignalEnvelope& env) {
  if (env.payload.size() > SignalEnvelope::kMaxPayload) throw Error(Errc::validation, "payload exceeds 64 KiB");
  if (env.to && env.to == env.from) throw Error(Errc::validation, "envelope addressed to its sender");
  ordered_json obj;
  obj["v"] = SignalEnvelope::kVersion;
  obj["stream"] = env.stream_text();
  obj["from"] = env.from.str();
  if (env.to) obj["to"] = env.to->str();
  obj["kind"] = std::string(to_string(env.kind));
  obj["seq"] = env.seq;
  obj["payload"] = env.payload;
  try {
    return obj.dump();
  } catch (const json::type_error& e) {
    throw Error(Errc::validation, std::string("payload is not valid UTF-8: ") + e.what());
  }
}

SignalEnvelope decode(std::string_view bytes) {
  // The callback runs per parse event; at depth 1 every key is checked
  // against the closed field set and for duplicates.
  std::set<std::string> seen;
  std::string bad_key;
  auto check_keys = [&](int depth, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::key && depth == 1) {
      auto key = parsed.get<std::string>();
      if (!kFields.contains(key) || !seen.insert(key).second) {
        if (bad_key.empty()) bad_key = key;
      }
    }
    return true;
  };

  json obj;
  try {
    obj = json::parse(bytes.begin(), bytes.end(), check_keys);
  } catch (const json::parse_error& e) {
    throw DecodeError(e.byte, "malformed envelope");
  }
  if (!obj.is_object()) throw DecodeError(0, "envelope is not an object");
  if (!bad_key.empty()) throw DecodeError(0, "unexpected or duplicate field '" + bad_key + "'");

  const auto& v = field(obj, "v");
  if (!v.is_number_integer()) throw DecodeError(0, "field 'v' must be an integer");
  if (v.get<std::int64_t>() != SignalEnvelope::kVersion)
    throw Error(Errc::version, "unsupported envelope version " + v.dump());

  const auto& kind = field(obj, "kind");
  if (!kind.is_string()) throw DecodeError(0, "field 'kind' must be a string");

  SignalEnvelope env;
  env.kind = message_kind_from_string(kind.get<std::string>());

  const auto& stream = field(obj, "stream");
  const auto& from = field(obj, "from");
  const auto& seq = field(obj, "seq");
  const auto& payload = field(obj, "payload");
  if (!stream.is_string() || !from.is_string() || !payload.is_string())
    throw DecodeError(0, "fields 'stream', 'from', 'payload' must be strings");
  if (!seq.is_number_unsigned()) throw DecodeError(0, "field 'seq' must be a non-negative integer");

  try {
    env.stream = parse_stream_field(stream.get<std::string>());
    env.from = EndpointId(from.get<std::string>());
    if (auto it = obj.find("to"); it != obj.end()) {
      if (!it->is_string()) throw DecodeError(0, "field 'to' must be a string");
      env.to = EndpointId(it->get<std::string>());
    }
  } catch (const DecodeError&) {
    throw;
  } catch (const Error& e) {
    throw DecodeError(0, e.what());
  }
  env.seq = seq.get<std::uint64_t>();
  env.payload = payload.get<std::string>();
  if (env.payload.size() > SignalEnvelope::kMaxPayload) throw DecodeError(0, "payload exceeds 64 KiB");
  return env;
}

}  // namespace nstream
