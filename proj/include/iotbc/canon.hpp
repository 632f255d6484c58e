#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace iotbc {

using Json = nlohmann::json;
using Bytes = std::vector<std::uint8_t>;

// Canonical serialization, used for every byte string that gets hashed or
// signed: object keys sorted lexicographically (nlohmann's map backend),
// no insignificant whitespace, UTF-8, integers in decimal, byte strings
// base64, timestamps as RFC-3339 UTC with millisecond precision.
namespace canon {

std::string dump(const Json& j);
Bytes dumpBytes(const Json& j);
std::optional<Json> parse(const std::string& text);
std::optional<Json> parse(const Bytes& raw);

std::string b64(const Bytes& raw);
std::optional<Bytes> fromB64(const std::string& text);

std::string hex(const Bytes& raw);

std::string bytesToString(const Bytes& raw);
Bytes stringToBytes(const std::string& s);

// RFC-3339 UTC, fixed form "YYYY-MM-DDTHH:MM:SS.mmmZ". Lexicographic order
// of the canonical form equals chronological order.
std::string formatTimeMs(std::int64_t epochMs);
std::optional<std::int64_t> parseTimeMs(const std::string& text);

std::int64_t nowMs();

} // namespace canon
} // namespace iotbc
