#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "iotbc/canon.hpp"
#include "iotbc/crypto.hpp"
#include "iotbc/identity.hpp"

using namespace iotbc;

TEST_CASE("canonical dump sorts keys and strips whitespace") {
    Json j;
    j["zeta"] = 1;
    j["alpha"] = "x";
    j["mid"] = Json::array({1, 2, 3});
    j["nested"] = Json{{"b", 2}, {"a", 1}};
    CHECK(canon::dump(j) == R"({"alpha":"x","mid":[1,2,3],"nested":{"a":1,"b":2},"zeta":1})");
    // Construction order must not matter.
    Json k;
    k["nested"] = Json{{"a", 1}, {"b", 2}};
    k["alpha"] = "x";
    k["zeta"] = 1;
    k["mid"] = Json::array({1, 2, 3});
    CHECK(canon::dump(j) == canon::dump(k));
    CHECK(crypto::sha256Hex(canon::dump(j)) ==
          "7e017e810d276e2955e72b96f06bf88ca7154096e2a9bcab5d6e59b7628d7fda");
}

TEST_CASE("canonical parse round trip") {
    auto j = canon::parse(std::string(R"({"b":2,"a":[true,null,"s"]})"));
    REQUIRE(j.has_value());
    CHECK(canon::dump(*j) == R"({"a":[true,null,"s"],"b":2})");
    CHECK_FALSE(canon::parse(std::string("{not json")).has_value());
    CHECK_FALSE(canon::parse(std::string("")).has_value());
}

TEST_CASE("base64 fixtures and round trip") {
    CHECK(canon::b64({}) == "");
    CHECK(canon::b64(canon::stringToBytes("hello world")) == "aGVsbG8gd29ybGQ=");
    CHECK(canon::b64(Bytes{0, 1, 2, 3, 4, 5}) == "AAECAwQF");

    auto back = canon::fromB64("aGVsbG8gd29ybGQ=");
    REQUIRE(back.has_value());
    CHECK(canon::bytesToString(*back) == "hello world");
    CHECK_FALSE(canon::fromB64("not!valid!").has_value());

    std::mt19937 rng(7);
    for (int i = 0; i < 200; ++i) {
        Bytes raw(rng() % 300);
        for (auto& b : raw) b = static_cast<std::uint8_t>(rng());
        auto rt = canon::fromB64(canon::b64(raw));
        REQUIRE(rt.has_value());
        CHECK(*rt == raw);
    }
}

TEST_CASE("hex encoding") {
    CHECK(canon::hex({}) == "");
    CHECK(canon::hex(Bytes{0x00, 0xff, 0x10}) == "00ff10");
}

TEST_CASE("sha256 fixtures") {
    CHECK(crypto::sha256Hex(std::string("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(crypto::sha256Hex(std::string("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(crypto::sha256Hex(std::string("The quick brown fox jumps over the lazy dog")) ==
          "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("time format fixtures and round trip") {
    CHECK(canon::formatTimeMs(0) == "1970-01-01T00:00:00.000Z");
    CHECK(canon::formatTimeMs(1) == "1970-01-01T00:00:00.001Z");
    CHECK(canon::formatTimeMs(999) == "1970-01-01T00:00:00.999Z");
    CHECK(canon::formatTimeMs(1700000000123LL) == "2023-11-14T22:13:20.123Z");
    CHECK(canon::formatTimeMs(1755648000000LL) == "2025-08-20T00:00:00.000Z");

    for (std::int64_t ms : {0LL, 1LL, 999LL, 1700000000123LL, 1755648000000LL}) {
        auto parsed = canon::parseTimeMs(canon::formatTimeMs(ms));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == ms);
    }
    CHECK_FALSE(canon::parseTimeMs("2023-11-14T22:13:20Z").has_value());
    CHECK_FALSE(canon::parseTimeMs("garbage").has_value());

    // Lexicographic order of the canonical form equals chronological order.
    std::mt19937_64 rng(11);
    for (int i = 0; i < 500; ++i) {
        std::int64_t a = rng() % 4102444800000LL;
        std::int64_t b = rng() % 4102444800000LL;
        CHECK((a < b) == (canon::formatTimeMs(a) < canon::formatTimeMs(b)));
    }
}

TEST_CASE("sign and verify") {
    crypto::init();
    auto kp = crypto::generateKeyPair();
    Bytes msg = canon::stringToBytes("payload to sign");
    Bytes sig = crypto::sign(msg, kp.secretKey);
    CHECK(sig.size() == crypto::kSignatureSize);
    CHECK(crypto::verify(msg, sig, kp.publicKey));

    // Any bit flip in message or signature must fail verification.
    Bytes tampered = msg;
    tampered[0] ^= 1;
    CHECK_FALSE(crypto::verify(tampered, sig, kp.publicKey));
    Bytes badSig = sig;
    badSig[10] ^= 1;
    CHECK_FALSE(crypto::verify(msg, badSig, kp.publicKey));

    auto other = crypto::generateKeyPair();
    CHECK_FALSE(crypto::verify(msg, sig, other.publicKey));

    // Malformed lengths are rejected, not UB.
    CHECK_FALSE(crypto::verify(msg, Bytes{1, 2, 3}, kp.publicKey));
    CHECK_FALSE(crypto::verify(msg, sig, Bytes{1, 2, 3}));
}

TEST_CASE("seeded keypairs are deterministic") {
    crypto::init();
    Bytes seed(crypto::kSeedSize, 0x42);
    auto a = crypto::keyPairFromSeed(seed);
    auto b = crypto::keyPairFromSeed(seed);
    CHECK(a.publicKey == b.publicKey);
    CHECK(a.secretKey == b.secretKey);
    Bytes seed2(crypto::kSeedSize, 0x43);
    auto c = crypto::keyPairFromSeed(seed2);
    CHECK(a.publicKey != c.publicKey);
}

static iotbc::CertificateAuthority fixtureCa() {
    using namespace iotbc;
    crypto::init();
    Bytes rootSeed(32, 0x11);
    return CertificateAuthority::create("org1", 1755648000000LL, 1787184000000LL, rootSeed);
}

TEST_CASE("issue and verify round trip") {
    using namespace iotbc;
    auto ca = fixtureCa();
    MembershipDirectory dir;
    dir.rootCerts["org1"] = ca.root().certificate.publicKey;

    auto id = ca.issue("thermo-1", Role::Writer, 1755648000000LL, 1787184000000LL);
    auto res = verifyCertificate(dir, id.certificate, 1760000000000LL);
    REQUIRE(res.ok());
    CHECK(res.orgId == "org1");
    CHECK(res.role == Role::Writer);
}

TEST_CASE("degenerate validity window rejected") {
    using namespace iotbc;
    auto ca = fixtureCa();
    CHECK_THROWS_AS(ca.issue("x", Role::Reader, 100, 100), std::invalid_argument);
    CHECK_THROWS_AS(CertificateAuthority::create("o", 5, 5), std::invalid_argument);
}

TEST_CASE("serials strictly increasing") {
    using namespace iotbc;
    auto ca = fixtureCa();
    auto a = ca.issue("a", Role::Reader, 0, 1000);
    auto b = ca.issue("b", Role::Reader, 0, 1000);
    auto c = ca.issue("c", Role::Reader, 0, 1000);
    CHECK(a.certificate.serial < b.certificate.serial);
    CHECK(b.certificate.serial < c.certificate.serial);
}

TEST_CASE("verify error taxonomy") {
    using namespace iotbc;
    auto ca = fixtureCa();
    MembershipDirectory dir;
    dir.rootCerts["org1"] = ca.root().certificate.publicKey;
    auto id = ca.issue("dev", Role::Writer, 1000, 2000);

    SUBCASE("unknown issuer") {
        MembershipDirectory empty;
        CHECK(verifyCertificate(empty, id.certificate, 1500).error == VerifyError::UnknownIssuer);
    }
    SUBCASE("cross-org issuer claim") {
        Certificate c = id.certificate;
        c.orgId = "org2";
        CHECK(verifyCertificate(dir, c, 1500).error == VerifyError::UnknownIssuer);
    }
    SUBCASE("tampered payload byte") {
        Certificate c = id.certificate;
        c.subject[0] ^= 1;
        CHECK(verifyCertificate(dir, c, 1500).error == VerifyError::BadSignature);
    }
    SUBCASE("validity boundaries") {
        CHECK(verifyCertificate(dir, id.certificate, 999).error == VerifyError::NotYetValid);
        CHECK(verifyCertificate(dir, id.certificate, 1000).ok());
        CHECK(verifyCertificate(dir, id.certificate, 2000).ok());
        CHECK(verifyCertificate(dir, id.certificate, 3000).error == VerifyError::Expired);
    }
    SUBCASE("revocation") {
        CHECK(verifyCertificate(dir, id.certificate, 1500).ok());
        CHECK(dir.revoke("org1", id.certificate.serial));
        CHECK(verifyCertificate(dir, id.certificate, 1500).error == VerifyError::Revoked);
        CHECK(dir.revoke("org1", id.certificate.serial));  // idempotent
        CHECK(dir.crls["org1"].size() == 1);
        CHECK_FALSE(dir.revoke("orgX", 1));
    }
}

TEST_CASE("device id fixture") {
    using namespace iotbc;
    auto ca = fixtureCa();
    Bytes devSeed(32, 0x22);
    auto dev = ca.issueWithSeed("thermo-1", Role::Writer, 1755648000000LL, 1787184000000LL,
                                devSeed);
    // Canonical encoding of this certificate is fully deterministic, so
    // both the bytes and their digest are pinned.
    CHECK(canon::bytesToString(dev.certificate.canonicalBytes()) ==
          R"({"issuerOrgId":"org1","issuerSignature":"dyh3NEGikjdvCXddk0ApWTiM+iV4KpBZzSEXDKagK4Az3py5/yUDt/AVmcU+Z4mT6YukgoUNLLBGLkQznCpXAA==","notAfter":"2026-08-20T00:00:00.000Z","notBefore":"2025-08-20T00:00:00.000Z","orgId":"org1","publicKey":"oJql9HpnWYAv+VX43C0qFKXJnSO+l/hkEn/5ODRVpPA=","role":"writer","serial":1,"subject":"thermo-1"})");
    CHECK(deriveDeviceId(dev.certificate) ==
          "224575fde4184fb726faa2cf0d81bab2defcd246d428db29761270c5b9f17084");
    CHECK(deriveDeviceId(dev.certificate) == deriveDeviceId(dev.certificate));
    CHECK(deriveDeviceId(dev.certificate).size() == 64);
}

TEST_CASE("device ids distinct across certificates") {
    using namespace iotbc;
    auto ca = fixtureCa();
    std::set<std::string> ids;
    for (int i = 0; i < 50; ++i) {
        auto id = ca.issue("dev-" + std::to_string(i), Role::Writer, 0, 1000);
        ids.insert(deriveDeviceId(id.certificate));
    }
    CHECK(ids.size() == 50);
}

TEST_CASE("identity signing resolves per org in a shared wallet") {
    using namespace iotbc;
    crypto::init();
    auto caA = CertificateAuthority::create("orgA", 0, 10000);
    auto caB = CertificateAuthority::create("orgB", 0, 10000);
    MembershipDirectory dir;
    dir.rootCerts["orgA"] = caA.root().certificate.publicKey;
    dir.rootCerts["orgB"] = caB.root().certificate.publicKey;

    Wallet w;
    CHECK(w.put("a", caA.issue("user", Role::Admin, 0, 10000)));
    CHECK(w.put("b", caB.issue("user", Role::Reader, 0, 10000)));
    CHECK_FALSE(w.put("a", caA.issue("dup", Role::Reader, 0, 10000)));

    Bytes msg = canon::stringToBytes("m");
    for (auto [label, org, role] : {std::tuple{"a", "orgA", Role::Admin},
                                    std::tuple{"b", "orgB", Role::Reader}}) {
        const Identity* id = w.get(label);
        REQUIRE(id != nullptr);
        CHECK(verifySignature(id->certificate, msg, id->sign(msg)));
        auto res = verifyCertificate(dir, id->certificate, 5000);
        REQUIRE(res.ok());
        CHECK(res.orgId == org);
        CHECK(res.role == role);
    }
    CHECK(w.get("missing") == nullptr);
}

TEST_CASE("issue verify revoke round trip across subjects and roles") {
    using namespace iotbc;
    auto ca = fixtureCa();
    MembershipDirectory dir;
    dir.rootCerts["org1"] = ca.root().certificate.publicKey;
    std::mt19937 rng(3);
    for (Role role : {Role::Reader, Role::Writer, Role::Admin}) {
        for (int i = 0; i < 10; ++i) {
            std::string subject = "s" + std::to_string(rng() % 100000);
            auto id = ca.issue(subject, role, 0, 1000000);
            auto before = verifyCertificate(dir, id.certificate, 500);
            REQUIRE(before.ok());
            CHECK(before.role == role);
            dir.revoke("org1", id.certificate.serial);
            CHECK(verifyCertificate(dir, id.certificate, 500).error == VerifyError::Revoked);
        }
    }
}

TEST_CASE("identity artifacts round trip through json") {
    using namespace iotbc;
    auto ca = fixtureCa();
    auto id = ca.issue("rt", Role::Writer, 0, 1000);

    auto cert2 = Certificate::fromJson(id.certificate.toJson());
    REQUIRE(cert2.has_value());
    CHECK(cert2->canonicalBytes() == id.certificate.canonicalBytes());

    auto id2 = Identity::fromJson(id.toJson());
    REQUIRE(id2.has_value());
    CHECK(id2->secretKey == id.secretKey);

    MembershipDirectory dir;
    dir.rootCerts["org1"] = ca.root().certificate.publicKey;
    dir.revoke("org1", 7);
    auto dir2 = MembershipDirectory::fromJson(dir.toJson());
    REQUIRE(dir2.has_value());
    CHECK(dir2->isRevoked("org1", 7));
    CHECK(canon::dump(dir2->toJson()) == canon::dump(dir.toJson()));

    auto ca2 = CertificateAuthority::fromJson(ca.toJson());
    REQUIRE(ca2.has_value());
    CHECK(ca2->nextSerial() == ca.nextSerial());
    auto next = ca2->issue("after-reload", Role::Reader, 0, 1000);
    CHECK(verifyCertificate(dir, next.certificate, 500).ok());

    Wallet w;
    w.put("x", id);
    auto w2 = Wallet::fromJson(w.toJson());
    REQUIRE(w2.has_value());
    CHECK(w2->get("x") != nullptr);

    CHECK_FALSE(Certificate::fromJson(Json::object()).has_value());
    CHECK_FALSE(Certificate::fromJson(Json(3)).has_value());
}

TEST_CASE("json files persist atomically") {
    using namespace iotbc;
    std::string path = "/tmp/iotbc_test_store.json";
    Json j{{"k", "v"}, {"n", 42}};
    REQUIRE(saveJsonFile(path, j));
    auto back = loadJsonFile(path);
    REQUIRE(back.has_value());
    CHECK(canon::dump(*back) == canon::dump(j));
    CHECK_FALSE(loadJsonFile("/tmp/definitely_missing_iotbc.json").has_value());
    std::remove(path.c_str());
}

TEST_CASE("verify cache matches uncached results") {
    using namespace iotbc;
    auto ca = fixtureCa();
    MembershipDirectory dir;
    dir.rootCerts["org1"] = ca.root().certificate.publicKey;
    auto id = ca.issue("cached", Role::Writer, 1000, 2000);

    VerifyCache cache;
    CHECK(cache.verify(dir, id.certificate, 1500).ok());
    CHECK(cache.verify(dir, id.certificate, 1500).ok());
    // Validity and revocation stay live even with the signature cached.
    CHECK(cache.verify(dir, id.certificate, 3000).error == VerifyError::Expired);
    dir.revoke("org1", id.certificate.serial);
    CHECK(cache.verify(dir, id.certificate, 1500).error == VerifyError::Revoked);

    Certificate tampered = id.certificate;
    tampered.subject = "other";
    CHECK(cache.verify(dir, tampered, 1500).error == VerifyError::BadSignature);
    CHECK(cache.verify(dir, tampered, 1500).error == VerifyError::BadSignature);
}

#include "iotbc/ledger.hpp"

static iotbc::Transaction sampleTx(iotbc::CertificateAuthority& ca, const std::string& txId,
                                   const std::string& key, const std::string& value) {
    using namespace iotbc;
    Transaction t;
    t.txId = txId;
    t.creatorCert = ca.issue("tx-maker", Role::Writer, 0, 4102444800000LL).certificate;
    t.contractOp = "register_device";
    t.args = {canon::stringToBytes(value)};
    t.clientTimestampMs = 1700000000000LL;
    t.readSet = {{key, std::nullopt}};
    t.writeSet = {{key, canon::stringToBytes(value)}};
    t.resultPayload = canon::stringToBytes("ok");
    return t;
}

static iotbc::Block nextBlock(const iotbc::BlockStore& store,
                              std::vector<iotbc::Transaction> txs) {
    iotbc::Block b;
    b.number = store.height();
    b.prevHash = store.headHash();
    b.dataHash = iotbc::Block::computeDataHash(txs);
    b.transactions = std::move(txs);
    b.commitMetadata.assign(b.transactions.size(), iotbc::ValidationCode::VALID);
    return b;
}

TEST_CASE("genesis fixture hashes") {
    using namespace iotbc;
    crypto::init();
    Block g = Block::makeGenesis();
    CHECK(g.number == 0);
    CHECK(g.prevHash == Bytes(32, 0));
    // Empty transaction list encodes as "[]"; digest from an external
    // hashing utility.
    CHECK(canon::hex(g.dataHash) ==
          "4f53cda18c2baa0c0354bb5f9a3ecbe5ed12ab4d8e11ba873c2f11161202b945");
    CHECK(canon::hex(computeBlockHash(g)) ==
          "e8c3f8a77a8de74979271c818f38d712b80a3fe77aec7efeebc1dc77bd32b426");
    CHECK(computeBlockHash(g) == computeBlockHash(g));
    Block g2 = g;
    g2.number = 1;
    CHECK(computeBlockHash(g2) != computeBlockHash(g));
}

TEST_CASE("append enforces height and linkage") {
    using namespace iotbc;
    auto ca = fixtureCa();
    BlockStore store;
    CHECK(store.append(Block::makeGenesis()) == AppendError::Ok);
    CHECK(store.height() == 1);

    Block b1 = nextBlock(store, {sampleTx(ca, "t1", "k1", "v1")});
    Block badHeight = b1;
    badHeight.number = 5;
    CHECK(store.append(badHeight) == AppendError::HeightMismatch);
    Block badPrev = b1;
    badPrev.prevHash = Bytes(32, 0xab);
    CHECK(store.append(badPrev) == AppendError::PrevHashMismatch);
    CHECK(store.height() == 1);

    CHECK(store.append(b1) == AppendError::Ok);
    Block b2 = nextBlock(store, {sampleTx(ca, "t2", "k2", "v2")});
    CHECK(store.append(b2) == AppendError::Ok);
    CHECK(store.height() == 3);
    CHECK_FALSE(store.verifyChain().has_value());
}

TEST_CASE("verify chain reports first tampered block") {
    using namespace iotbc;
    auto ca = fixtureCa();
    BlockStore store;
    store.append(Block::makeGenesis());
    for (int i = 1; i <= 9; ++i) {
        store.append(nextBlock(store, {sampleTx(ca, "t" + std::to_string(i),
                                                "k" + std::to_string(i), "v")}));
    }
    CHECK_FALSE(store.verifyChain().has_value());

    // Mutating a transaction in block 4 breaks its dataHash.
    BlockStore tampered = store;
    const_cast<Block&>(tampered.at(4)).transactions[0].args[0][0] ^= 1;
    auto bad = tampered.verifyChain();
    REQUIRE(bad.has_value());
    CHECK(*bad == 4);

    // Mutating a header byte breaks linkage at the successor.
    BlockStore tampered2 = store;
    const_cast<Block&>(tampered2.at(6)).prevHash[0] ^= 1;
    auto bad2 = tampered2.verifyChain();
    REQUIRE(bad2.has_value());
    CHECK(*bad2 == 6);
}

TEST_CASE("block store persists and reloads") {
    using namespace iotbc;
    auto ca = fixtureCa();
    std::string path = "/tmp/iotbc_test_blocks.bin";
    std::remove(path.c_str());
    {
        auto store = BlockStore::open(path);
        REQUIRE(store.has_value());
        CHECK(store->append(Block::makeGenesis()) == AppendError::Ok);
        CHECK(store->append(nextBlock(*store, {sampleTx(ca, "p1", "k", "v")})) ==
              AppendError::Ok);
        CHECK(store->append(nextBlock(*store, {sampleTx(ca, "p2", "k2", "v2")})) ==
              AppendError::Ok);
    }
    auto reloaded = BlockStore::open(path);
    REQUIRE(reloaded.has_value());
    CHECK(reloaded->height() == 3);
    CHECK_FALSE(reloaded->verifyChain().has_value());
    CHECK(reloaded->at(1).transactions[0].txId == "p1");

    // A torn trailing record is dropped, earlier blocks survive.
    {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out.write("\x00\x00\x01\x00partial", 11);
    }
    auto afterTear = BlockStore::open(path);
    REQUIRE(afterTear.has_value());
    CHECK(afterTear->height() == 3);
    std::remove(path.c_str());
}

TEST_CASE("transaction json round trip preserves endorsed bytes") {
    using namespace iotbc;
    auto ca = fixtureCa();
    Transaction t = sampleTx(ca, "rt", "key/a", "value");
    t.readSet.push_back({"other", Version{3, 7}});
    t.writeSet.push_back({"gone", std::nullopt});
    auto endorser = ca.issue("endorser", Role::Writer, 0, 4102444800000LL);
    t.endorsements.push_back({endorser.certificate, endorser.sign(t.endorsedBytes())});

    auto back = Transaction::fromJson(t.toJson());
    REQUIRE(back.has_value());
    CHECK(back->endorsedBytes() == t.endorsedBytes());
    CHECK(canon::dump(back->toJson()) == canon::dump(t.toJson()));
    CHECK(back->readSet == t.readSet);
    CHECK(back->writeSet == t.writeSet);
    CHECK(verifySignature(back->endorsements[0].endorserCert, back->endorsedBytes(),
                          back->endorsements[0].signature));

    Block b;
    b.number = 3;
    b.prevHash = Bytes(32, 1);
    b.dataHash = Block::computeDataHash({t});
    b.transactions = {t};
    b.commitMetadata = {ValidationCode::MVCC_CONFLICT};
    auto b2 = Block::fromJson(b.toJson());
    REQUIRE(b2.has_value());
    CHECK(canon::dump(b2->toJson()) == canon::dump(b.toJson()));
    CHECK(b2->commitMetadata[0] == ValidationCode::MVCC_CONFLICT);
    CHECK(computeBlockHash(*b2) == computeBlockHash(b));
}

TEST_CASE("commit metadata stays outside the hashes") {
    using namespace iotbc;
    auto ca = fixtureCa();
    Transaction t = sampleTx(ca, "meta", "k", "v");
    Block a;
    a.number = 1;
    a.prevHash = Bytes(32, 2);
    a.dataHash = Block::computeDataHash({t});
    a.transactions = {t};
    a.commitMetadata = {ValidationCode::VALID};
    Block b = a;
    b.commitMetadata = {ValidationCode::BAD_SIGNATURE};
    CHECK(computeBlockHash(a) == computeBlockHash(b));
    CHECK(Block::computeDataHash(a.transactions) == Block::computeDataHash(b.transactions));
}

TEST_CASE("world state get apply delete") {
    using namespace iotbc;
    WorldState ws;
    CHECK(ws.get("missing") == nullptr);

    ws.applyWriteSet({{"k", canon::stringToBytes("v")}}, Version{2, 0});
    const StateEntry* e = ws.get("k");
    REQUIRE(e != nullptr);
    CHECK(canon::bytesToString(e->value) == "v");
    CHECK(e->version == Version{2, 0});

    ws.applyWriteSet({{"k", std::nullopt}}, Version{3, 0});
    CHECK(ws.get("k") == nullptr);
}

TEST_CASE("world state scan and content hash") {
    using namespace iotbc;
    WorldState a;
    a.applyWriteSet({{"dev/org1/aaa", canon::stringToBytes("1")},
                     {"dev/org1/bbb", canon::stringToBytes("2")},
                     {"dev/org2/ccc", canon::stringToBytes("3")},
                     {"svc/org1/aaa/temp", canon::stringToBytes("4")}},
                    Version{1, 0});
    auto hits = a.scanPrefix("dev/org1/");
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].first == "dev/org1/aaa");
    CHECK(hits[1].first == "dev/org1/bbb");
    CHECK(a.scanPrefix("zzz").empty());

    // Apply order must not matter for the final content.
    WorldState b;
    b.applyWriteSet({{"svc/org1/aaa/temp", canon::stringToBytes("4")},
                     {"dev/org2/ccc", canon::stringToBytes("3")}},
                    Version{1, 0});
    b.applyWriteSet({{"dev/org1/bbb", canon::stringToBytes("2")},
                     {"dev/org1/aaa", canon::stringToBytes("1")}},
                    Version{1, 0});
    CHECK(a.contentHash() == b.contentHash());

    WorldState c = a;
    c.applyWriteSet({{"dev/org1/aaa", canon::stringToBytes("other")}}, Version{1, 0});
    CHECK(c.contentHash() != a.contentHash());

    auto back = WorldState::fromJson(a.toJson());
    REQUIRE(back.has_value());
    CHECK(back->contentHash() == a.contentHash());
}

TEST_CASE("version ordering") {
    using namespace iotbc;
    CHECK(Version{1, 5} < Version{2, 0});
    CHECK(Version{2, 0} < Version{2, 1});
    CHECK(Version{2, 1} == Version{2, 1});
    auto v = Version::fromJson(Version{7, 3}.toJson());
    REQUIRE(v.has_value());
    CHECK(*v == Version{7, 3});
}
