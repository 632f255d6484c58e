#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "iotbc/canon.hpp"

namespace iotbc::crypto {

inline constexpr std::size_t kHashSize = 32;
inline constexpr std::size_t kPublicKeySize = 32;
inline constexpr std::size_t kSecretKeySize = 64;
inline constexpr std::size_t kSignatureSize = 64;
inline constexpr std::size_t kSeedSize = 32;

using Hash = std::array<std::uint8_t, kHashSize>;

// Must be called once before any other function here. Safe to call twice.
void init();

Hash sha256(const Bytes& data);
Hash sha256(const std::string& data);
std::string sha256Hex(const Bytes& data);
std::string sha256Hex(const std::string& data);

struct KeyPair {
    Bytes publicKey;  // 32 bytes
    Bytes secretKey;  // 64 bytes
};

KeyPair generateKeyPair();
// Deterministic keypair from a 32-byte seed. Used for test fixtures.
KeyPair keyPairFromSeed(const Bytes& seed);

Bytes sign(const Bytes& message, const Bytes& secretKey);
// False on bad signature, wrong lengths, or malformed key material.
bool verify(const Bytes& message, const Bytes& signature, const Bytes& publicKey);

Bytes randomBytes(std::size_t n);

} // namespace iotbc::crypto
