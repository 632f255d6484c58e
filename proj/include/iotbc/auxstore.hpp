#pragma once

#include <optional>
#include <string>
#include <variant>

#include "iotbc/canon.hpp"

namespace iotbc {

// Content-addressed blob store: one file per blob under the root, named
// by the sha256 of its bytes. "aux://sha256/{64-hex}" is self-verifying;
// the reserved stream scheme is unimplemented.
constexpr const char* kAuxScheme = "aux://sha256/";

std::string makeBlobUri(const Bytes& data);
std::optional<std::string> digestFromUri(const std::string& uri);

enum class AuxError { BadUri, EmptyBlob, NotFound, IntegrityFailure, IoFailure };

std::string auxErrorToString(AuxError e);

class AuxStore {
public:
    explicit AuxStore(std::string rootDir);

    // Idempotent: identical bytes land in one file with one URI.
    std::variant<std::string, AuxError> put(const Bytes& data);
    std::variant<Bytes, AuxError> get(const std::string& uri) const;
    // Pure check, no store access.
    static bool verify(const std::string& uri, const Bytes& data);

    const std::string& root() const { return root_; }

private:
    std::string root_;

    std::string pathFor(const std::string& digest) const;
};

} // namespace iotbc
