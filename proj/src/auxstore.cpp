#include "iotbc/auxstore.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "iotbc/crypto.hpp"

namespace iotbc {

std::string makeBlobUri(const Bytes& data) {
    return std::string(kAuxScheme) + crypto::sha256Hex(data);
}

std::optional<std::string> digestFromUri(const std::string& uri) {
    const std::string scheme = kAuxScheme;
    if (uri.size() != scheme.size() + 64 || uri.compare(0, scheme.size(), scheme) != 0)
        return std::nullopt;
    std::string digest = uri.substr(scheme.size());
    for (char c : digest)
        if (!(c >= '0' && c <= '9') && !(c >= 'a' && c <= 'f')) return std::nullopt;
    return digest;
}

std::string auxErrorToString(AuxError e) {
    switch (e) {
        case AuxError::BadUri: return "bad_uri";
        case AuxError::EmptyBlob: return "empty_blob";
        case AuxError::NotFound: return "not_found";
        case AuxError::IntegrityFailure: return "integrity_failure";
        case AuxError::IoFailure: return "io_failure";
    }
    return "unknown";
}

AuxStore::AuxStore(std::string rootDir) : root_(std::move(rootDir)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
}

std::string AuxStore::pathFor(const std::string& digest) const {
    return root_ + "/" + digest;
}

std::variant<std::string, AuxError> AuxStore::put(const Bytes& data) {
    if (data.empty()) return AuxError::EmptyBlob;
    std::string digest = crypto::sha256Hex(data);
    std::string path = pathFor(digest);
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) return std::string(kAuxScheme) + digest;

    // Temp-then-rename keeps concurrent writers of the same blob safe:
    // both write identical bytes, the last rename wins.
    std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) return AuxError::IoFailure;
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
        if (!out.flush()) {
            std::remove(tmp.c_str());
            return AuxError::IoFailure;
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        return AuxError::IoFailure;
    }
    return std::string(kAuxScheme) + digest;
}

std::variant<Bytes, AuxError> AuxStore::get(const std::string& uri) const {
    auto digest = digestFromUri(uri);
    if (!digest) return AuxError::BadUri;
    std::ifstream in(pathFor(*digest), std::ios::binary);
    if (!in) return AuxError::NotFound;
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    // Never hand back bytes that no longer match their address.
    if (crypto::sha256Hex(data) != *digest) return AuxError::IntegrityFailure;
    return data;
}

bool AuxStore::verify(const std::string& uri, const Bytes& data) {
    auto digest = digestFromUri(uri);
    return digest && crypto::sha256Hex(data) == *digest;
}

} // namespace iotbc
