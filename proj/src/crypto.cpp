#include "iotbc/crypto.hpp"

#include <stdexcept>

#include <sodium.h>

namespace iotbc::crypto {

void init() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
}

Hash sha256(const Bytes& data) {
    Hash out{};
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

Hash sha256(const std::string& data) {
    Hash out{};
    crypto_hash_sha256(out.data(), reinterpret_cast<const unsigned char*>(data.data()),
                       data.size());
    return out;
}

std::string sha256Hex(const Bytes& data) {
    Hash h = sha256(data);
    return canon::hex(Bytes(h.begin(), h.end()));
}

std::string sha256Hex(const std::string& data) {
    Hash h = sha256(data);
    return canon::hex(Bytes(h.begin(), h.end()));
}

KeyPair generateKeyPair() {
    KeyPair kp;
    kp.publicKey.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secretKey.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_keypair(kp.publicKey.data(), kp.secretKey.data());
    return kp;
}

KeyPair keyPairFromSeed(const Bytes& seed) {
    if (seed.size() != kSeedSize) throw std::invalid_argument("seed must be 32 bytes");
    KeyPair kp;
    kp.publicKey.resize(crypto_sign_PUBLICKEYBYTES);
    kp.secretKey.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(kp.publicKey.data(), kp.secretKey.data(), seed.data());
    return kp;
}

Bytes sign(const Bytes& message, const Bytes& secretKey) {
    if (secretKey.size() != kSecretKeySize) throw std::invalid_argument("bad secret key size");
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(),
                         secretKey.data());
    return sig;
}

bool verify(const Bytes& message, const Bytes& signature, const Bytes& publicKey) {
    if (signature.size() != kSignatureSize || publicKey.size() != kPublicKeySize) return false;
    return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                       publicKey.data()) == 0;
}

Bytes randomBytes(std::size_t n) {
    Bytes out(n);
    randombytes_buf(out.data(), out.size());
    return out;
}

} // namespace iotbc::crypto
