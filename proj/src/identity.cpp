#include "iotbc/identity.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace iotbc {

std::string roleToString(Role r) {
    switch (r) {
        case Role::Reader: return "reader";
        case Role::Writer: return "writer";
        case Role::Admin: return "admin";
    }
    return "reader";
}

std::optional<Role> roleFromString(const std::string& s) {
    if (s == "reader") return Role::Reader;
    if (s == "writer") return Role::Writer;
    if (s == "admin") return Role::Admin;
    return std::nullopt;
}

std::string verifyErrorToString(VerifyError e) {
    switch (e) {
        case VerifyError::Ok: return "Ok";
        case VerifyError::UnknownIssuer: return "UnknownIssuer";
        case VerifyError::BadSignature: return "BadSignature";
        case VerifyError::NotYetValid: return "NotYetValid";
        case VerifyError::Expired: return "Expired";
        case VerifyError::Revoked: return "Revoked";
    }
    return "Ok";
}

Json Certificate::toJson() const {
    Json j;
    j["serial"] = serial;
    j["subject"] = subject;
    j["orgId"] = orgId;
    j["role"] = roleToString(role);
    j["publicKey"] = canon::b64(publicKey);
    j["notBefore"] = canon::formatTimeMs(notBeforeMs);
    j["notAfter"] = canon::formatTimeMs(notAfterMs);
    j["issuerOrgId"] = issuerOrgId;
    j["issuerSignature"] = canon::b64(issuerSignature);
    return j;
}

std::optional<Certificate> Certificate::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        Certificate c;
        c.serial = j.at("serial").get<std::int64_t>();
        c.subject = j.at("subject").get<std::string>();
        c.orgId = j.at("orgId").get<std::string>();
        auto role = roleFromString(j.at("role").get<std::string>());
        if (!role) return std::nullopt;
        c.role = *role;
        auto pk = canon::fromB64(j.at("publicKey").get<std::string>());
        if (!pk) return std::nullopt;
        c.publicKey = *pk;
        auto nb = canon::parseTimeMs(j.at("notBefore").get<std::string>());
        auto na = canon::parseTimeMs(j.at("notAfter").get<std::string>());
        if (!nb || !na) return std::nullopt;
        c.notBeforeMs = *nb;
        c.notAfterMs = *na;
        c.issuerOrgId = j.at("issuerOrgId").get<std::string>();
        auto sig = canon::fromB64(j.at("issuerSignature").get<std::string>());
        if (!sig) return std::nullopt;
        c.issuerSignature = *sig;
        return c;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Bytes Certificate::signingBytes() const {
    Json j = toJson();
    j.erase("issuerSignature");
    return canon::dumpBytes(j);
}

Bytes Certificate::canonicalBytes() const { return canon::dumpBytes(toJson()); }

Bytes Identity::sign(const Bytes& message) const { return crypto::sign(message, secretKey); }

Json Identity::toJson() const {
    Json j;
    j["certificate"] = certificate.toJson();
    j["secretKey"] = canon::b64(secretKey);
    return j;
}

std::optional<Identity> Identity::fromJson(const Json& j) {
    if (!j.is_object() || !j.contains("certificate") || !j.contains("secretKey"))
        return std::nullopt;
    auto cert = Certificate::fromJson(j["certificate"]);
    if (!cert) return std::nullopt;
    auto sk = canon::fromB64(j["secretKey"].get<std::string>());
    if (!sk) return std::nullopt;
    return Identity{*cert, *sk};
}

bool verifySignature(const Certificate& cert, const Bytes& message, const Bytes& signature) {
    return crypto::verify(message, signature, cert.publicKey);
}

std::string deriveDeviceId(const Certificate& cert) {
    return crypto::sha256Hex(cert.canonicalBytes());
}

bool MembershipDirectory::revoke(const std::string& orgId, std::int64_t serial) {
    if (!rootCerts.count(orgId)) return false;
    crls[orgId].insert(serial);
    return true;
}

bool MembershipDirectory::isRevoked(const std::string& orgId, std::int64_t serial) const {
    auto it = crls.find(orgId);
    return it != crls.end() && it->second.count(serial) > 0;
}

Json MembershipDirectory::toJson() const {
    Json roots = Json::object();
    for (const auto& [org, key] : rootCerts) roots[org] = canon::b64(key);
    Json crlJson = Json::object();
    for (const auto& [org, serials] : crls) {
        Json arr = Json::array();
        for (auto s : serials) arr.push_back(s);
        crlJson[org] = arr;
    }
    return Json{{"rootCerts", roots}, {"crls", crlJson}};
}

std::optional<MembershipDirectory> MembershipDirectory::fromJson(const Json& j) {
    if (!j.is_object() || !j.contains("rootCerts") || !j.contains("crls")) return std::nullopt;
    MembershipDirectory dir;
    try {
        for (const auto& [org, keyB64] : j["rootCerts"].items()) {
            auto key = canon::fromB64(keyB64.get<std::string>());
            if (!key) return std::nullopt;
            dir.rootCerts[org] = *key;
        }
        for (const auto& [org, serials] : j["crls"].items()) {
            if (!dir.rootCerts.count(org)) return std::nullopt;
            for (const auto& s : serials) dir.crls[org].insert(s.get<std::int64_t>());
        }
    } catch (const Json::exception&) {
        return std::nullopt;
    }
    return dir;
}

VerifyResult verifyCertificate(const MembershipDirectory& dir, const Certificate& cert,
                               std::int64_t nowMs) {
    auto rootIt = dir.rootCerts.find(cert.issuerOrgId);
    // A root may only vouch for members of its own org; a cross-org
    // issuer claim would let one org mint members of another.
    if (rootIt == dir.rootCerts.end() || cert.issuerOrgId != cert.orgId)
        return {VerifyError::UnknownIssuer, {}, {}};
    if (!crypto::verify(cert.signingBytes(), cert.issuerSignature, rootIt->second))
        return {VerifyError::BadSignature, {}, {}};
    if (nowMs < cert.notBeforeMs) return {VerifyError::NotYetValid, {}, {}};
    if (nowMs > cert.notAfterMs) return {VerifyError::Expired, {}, {}};
    if (dir.isRevoked(cert.orgId, cert.serial)) return {VerifyError::Revoked, {}, {}};
    return {VerifyError::Ok, cert.orgId, cert.role};
}

VerifyResult VerifyCache::verify(const MembershipDirectory& dir, const Certificate& cert,
                                 std::int64_t nowMs) {
    std::string key = crypto::sha256Hex(cert.canonicalBytes());
    {
        std::shared_lock lk(mu_);
        auto it = signatureOk_.find(key);
        if (it != signatureOk_.end()) {
            if (!it->second) return {VerifyError::BadSignature, {}, {}};
            auto rootIt = dir.rootCerts.find(cert.issuerOrgId);
            if (rootIt == dir.rootCerts.end() || cert.issuerOrgId != cert.orgId)
                return {VerifyError::UnknownIssuer, {}, {}};
            if (nowMs < cert.notBeforeMs) return {VerifyError::NotYetValid, {}, {}};
            if (nowMs > cert.notAfterMs) return {VerifyError::Expired, {}, {}};
            if (dir.isRevoked(cert.orgId, cert.serial)) return {VerifyError::Revoked, {}, {}};
            return {VerifyError::Ok, cert.orgId, cert.role};
        }
    }
    VerifyResult res = verifyCertificate(dir, cert, nowMs);
    if (res.error != VerifyError::UnknownIssuer) {
        std::unique_lock lk(mu_);
        signatureOk_[key] = res.error != VerifyError::BadSignature;
    }
    return res;
}

CertificateAuthority CertificateAuthority::create(const std::string& orgId,
                                                  std::int64_t notBeforeMs,
                                                  std::int64_t notAfterMs) {
    return create(orgId, notBeforeMs, notAfterMs, {});
}

CertificateAuthority CertificateAuthority::create(const std::string& orgId,
                                                  std::int64_t notBeforeMs,
                                                  std::int64_t notAfterMs,
                                                  const Bytes& rootSeed) {
    if (notBeforeMs >= notAfterMs) throw std::invalid_argument("invalid validity window");
    CertificateAuthority ca;
    ca.orgId_ = orgId;
    auto kp = rootSeed.empty() ? crypto::generateKeyPair() : crypto::keyPairFromSeed(rootSeed);
    Certificate cert;
    cert.serial = 0;
    cert.subject = orgId + " root";
    cert.orgId = orgId;
    cert.role = Role::Admin;
    cert.publicKey = kp.publicKey;
    cert.notBeforeMs = notBeforeMs;
    cert.notAfterMs = notAfterMs;
    cert.issuerOrgId = orgId;
    cert.issuerSignature = crypto::sign(cert.signingBytes(), kp.secretKey);
    ca.root_ = Identity{cert, kp.secretKey};
    ca.nextSerial_ = 1;
    return ca;
}

Identity CertificateAuthority::issue(const std::string& subject, Role role,
                                     std::int64_t notBeforeMs, std::int64_t notAfterMs) {
    return issueInternal(subject, role, notBeforeMs, notAfterMs, nullptr);
}

Identity CertificateAuthority::issueWithSeed(const std::string& subject, Role role,
                                             std::int64_t notBeforeMs, std::int64_t notAfterMs,
                                             const Bytes& seed) {
    return issueInternal(subject, role, notBeforeMs, notAfterMs, &seed);
}

Identity CertificateAuthority::issueInternal(const std::string& subject, Role role,
                                             std::int64_t notBeforeMs, std::int64_t notAfterMs,
                                             const Bytes* seed) {
    if (notBeforeMs >= notAfterMs) throw std::invalid_argument("invalid validity window");
    auto kp = seed ? crypto::keyPairFromSeed(*seed) : crypto::generateKeyPair();
    Certificate cert;
    cert.serial = nextSerial_++;
    cert.subject = subject;
    cert.orgId = orgId_;
    cert.role = role;
    cert.publicKey = kp.publicKey;
    cert.notBeforeMs = notBeforeMs;
    cert.notAfterMs = notAfterMs;
    cert.issuerOrgId = orgId_;
    cert.issuerSignature = crypto::sign(cert.signingBytes(), root_.secretKey);
    return Identity{cert, kp.secretKey};
}

Json CertificateAuthority::toJson() const {
    return Json{{"orgId", orgId_}, {"root", root_.toJson()}, {"nextSerial", nextSerial_}};
}

std::optional<CertificateAuthority> CertificateAuthority::fromJson(const Json& j) {
    if (!j.is_object() || !j.contains("orgId") || !j.contains("root") ||
        !j.contains("nextSerial"))
        return std::nullopt;
    auto root = Identity::fromJson(j["root"]);
    if (!root) return std::nullopt;
    CertificateAuthority ca;
    ca.orgId_ = j["orgId"].get<std::string>();
    ca.root_ = *root;
    ca.nextSerial_ = j["nextSerial"].get<std::int64_t>();
    return ca;
}

bool Wallet::put(const std::string& label, Identity id) {
    return entries.emplace(label, std::move(id)).second;
}

const Identity* Wallet::get(const std::string& label) const {
    auto it = entries.find(label);
    return it == entries.end() ? nullptr : &it->second;
}

Json Wallet::toJson() const {
    Json j = Json::object();
    for (const auto& [label, id] : entries) j[label] = id.toJson();
    return Json{{"entries", j}};
}

std::optional<Wallet> Wallet::fromJson(const Json& j) {
    if (!j.is_object() || !j.contains("entries")) return std::nullopt;
    Wallet w;
    for (const auto& [label, idJson] : j["entries"].items()) {
        auto id = Identity::fromJson(idJson);
        if (!id) return std::nullopt;
        w.entries.emplace(label, std::move(*id));
    }
    return w;
}

bool saveJsonFile(const std::string& path, const Json& j) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) return false;
        out << canon::dump(j);
        if (!out) return false;
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    return !ec;
}

std::optional<Json> loadJsonFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return canon::parse(text);
}

} // namespace iotbc
