#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "iotbc/canon.hpp"
#include "iotbc/crypto.hpp"

namespace iotbc {

enum class Role { Reader, Writer, Admin };

std::string roleToString(Role r);
std::optional<Role> roleFromString(const std::string& s);

struct Certificate {
    std::int64_t serial = 0;
    std::string subject;
    std::string orgId;
    Role role = Role::Reader;
    Bytes publicKey;
    std::int64_t notBeforeMs = 0;
    std::int64_t notAfterMs = 0;
    std::string issuerOrgId;
    Bytes issuerSignature;

    Json toJson() const;
    static std::optional<Certificate> fromJson(const Json& j);

    // Everything the issuer vouches for, i.e. all fields except the
    // signature itself.
    Bytes signingBytes() const;
    // Full canonical encoding, signature included. Device ids and cache
    // keys hash these bytes.
    Bytes canonicalBytes() const;
};

struct Identity {
    Certificate certificate;
    Bytes secretKey;

    Bytes sign(const Bytes& message) const;

    Json toJson() const;
    static std::optional<Identity> fromJson(const Json& j);
};

bool verifySignature(const Certificate& cert, const Bytes& message, const Bytes& signature);

// 64 lowercase hex chars, the hash of the certificate's canonical encoding.
std::string deriveDeviceId(const Certificate& cert);

enum class VerifyError { Ok, UnknownIssuer, BadSignature, NotYetValid, Expired, Revoked };

std::string verifyErrorToString(VerifyError e);

struct VerifyResult {
    VerifyError error = VerifyError::Ok;
    std::string orgId;
    Role role = Role::Reader;

    bool ok() const { return error == VerifyError::Ok; }
};

struct MembershipDirectory {
    std::map<std::string, Bytes> rootCerts;            // orgId -> root public key
    std::map<std::string, std::set<std::int64_t>> crls;  // orgId -> revoked serials

    // Idempotent; false if the org is unknown.
    bool revoke(const std::string& orgId, std::int64_t serial);
    bool isRevoked(const std::string& orgId, std::int64_t serial) const;

    Json toJson() const;
    static std::optional<MembershipDirectory> fromJson(const Json& j);
};

VerifyResult verifyCertificate(const MembershipDirectory& dir, const Certificate& cert,
                               std::int64_t nowMs);

// Root-signature checks dominate certificate verification cost, and the
// signature over a given certificate never changes. Validity windows and
// revocation are always evaluated fresh.
class VerifyCache {
public:
    VerifyResult verify(const MembershipDirectory& dir, const Certificate& cert,
                        std::int64_t nowMs);

private:
    std::shared_mutex mu_;
    std::unordered_map<std::string, bool> signatureOk_;
};

class CertificateAuthority {
public:
    // Fresh org root: serial 0, self-signed, admin role.
    static CertificateAuthority create(const std::string& orgId, std::int64_t notBeforeMs,
                                       std::int64_t notAfterMs);
    // Deterministic variant for fixtures: root key from a 32-byte seed.
    static CertificateAuthority create(const std::string& orgId, std::int64_t notBeforeMs,
                                       std::int64_t notAfterMs, const Bytes& rootSeed);

    Identity issue(const std::string& subject, Role role, std::int64_t notBeforeMs,
                   std::int64_t notAfterMs);
    Identity issueWithSeed(const std::string& subject, Role role, std::int64_t notBeforeMs,
                           std::int64_t notAfterMs, const Bytes& seed);

    const Identity& root() const { return root_; }
    const std::string& orgId() const { return orgId_; }
    std::int64_t nextSerial() const { return nextSerial_; }

    Json toJson() const;
    static std::optional<CertificateAuthority> fromJson(const Json& j);

private:
    std::string orgId_;
    Identity root_;
    std::int64_t nextSerial_ = 1;

    Identity issueInternal(const std::string& subject, Role role, std::int64_t notBeforeMs,
                           std::int64_t notAfterMs, const Bytes* seed);
};

struct Wallet {
    std::map<std::string, Identity> entries;  // label -> identity

    bool put(const std::string& label, Identity id);  // false if label taken
    const Identity* get(const std::string& label) const;

    Json toJson() const;
    static std::optional<Wallet> fromJson(const Json& j);
};

// Canonical-serialization files under a directory, shared by the CLI and
// node processes.
bool saveJsonFile(const std::string& path, const Json& j);
std::optional<Json> loadJsonFile(const std::string& path);

} // namespace iotbc
