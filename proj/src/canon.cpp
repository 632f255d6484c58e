#include "iotbc/canon.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include <sodium.h>

namespace iotbc::canon {

std::string dump(const Json& j) { return j.dump(); }

Bytes dumpBytes(const Json& j) {
    std::string s = j.dump();
    return Bytes(s.begin(), s.end());
}

std::optional<Json> parse(const std::string& text) {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

std::optional<Json> parse(const Bytes& raw) {
    Json j = Json::parse(raw.begin(), raw.end(), nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

std::string b64(const Bytes& raw) {
    std::string out;
    out.resize(sodium_base64_encoded_len(raw.size(), sodium_base64_VARIANT_ORIGINAL));
    sodium_bin2base64(out.data(), out.size(), raw.data(), raw.size(),
                      sodium_base64_VARIANT_ORIGINAL);
    out.resize(out.find('\0') == std::string::npos ? out.size() : out.find('\0'));
    return out;
}

std::optional<Bytes> fromB64(const std::string& text) {
    Bytes out(text.size());
    size_t realLen = 0;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr,
                          &realLen, nullptr, sodium_base64_VARIANT_ORIGINAL) != 0)
        return std::nullopt;
    out.resize(realLen);
    return out;
}

std::string hex(const Bytes& raw) {
    std::string out(raw.size() * 2 + 1, '\0');
    sodium_bin2hex(out.data(), out.size(), raw.data(), raw.size());
    out.resize(raw.size() * 2);
    return out;
}

std::string bytesToString(const Bytes& raw) { return std::string(raw.begin(), raw.end()); }

Bytes stringToBytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

std::string formatTimeMs(std::int64_t epochMs) {
    std::time_t secs = static_cast<std::time_t>(epochMs / 1000);
    int ms = static_cast<int>(epochMs % 1000);
    if (ms < 0) { ms += 1000; secs -= 1; }
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                  tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, ms);
    return buf;
}

std::optional<std::int64_t> parseTimeMs(const std::string& text) {
    std::tm tm{};
    int ms = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ",
                    &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                    &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms) != 7)
        return std::nullopt;
    if (text.size() != 24 || text[23] != 'Z') return std::nullopt;
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    std::time_t secs = timegm(&tm);
    if (secs == static_cast<std::time_t>(-1)) return std::nullopt;
    return static_cast<std::int64_t>(secs) * 1000 + ms;
}

std::int64_t nowMs() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

} // namespace iotbc::canon
