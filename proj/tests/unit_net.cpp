#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "iotbc/auxstore.hpp"
#include "iotbc/crypto.hpp"
#include "iotbc/net.hpp"
#include "iotbc/topology.hpp"

using namespace iotbc;

namespace {

struct CryptoInit {
    CryptoInit() { crypto::init(); }
} cryptoInit;

// Below the kernel's ephemeral range (32768+), where an outgoing
// connection could land on the very port a later fixture wants to bind.
constexpr int kBasePort = 21100;

Identity testIdentity() {
    auto ca = CertificateAuthority::create("netorg", 0, 4102444800000LL,
                                           Bytes(crypto::kSeedSize, 0x42));
    return ca.issueWithSeed("tester", Role::Writer, 0, 4102444800000LL,
                            Bytes(crypto::kSeedSize, 0x43));
}

} // namespace

TEST_CASE("envelopes round trip with and without certificates") {
    net::Envelope e;
    e.type = "Evaluate";
    e.ref = 42;
    e.payload = Json{{"key", "value"}, {"n", 7}};
    auto parsed = net::Envelope::fromJson(e.toJson());
    REQUIRE(parsed.has_value());
    CHECK(parsed->type == "Evaluate");
    CHECK(parsed->ref == 42);
    CHECK(parsed->payload["n"] == 7);
    CHECK_FALSE(parsed->senderCertificate.has_value());

    auto id = testIdentity();
    e.sign(id);
    CHECK(e.signatureValid());
    auto signedBack = net::Envelope::fromJson(e.toJson());
    REQUIRE(signedBack.has_value());
    CHECK(signedBack->signatureValid());
    signedBack->payload["n"] = 8;
    CHECK_FALSE(signedBack->signatureValid());

    CHECK_FALSE(net::Envelope::fromJson(Json{{"ref", 1}}).has_value());
    CHECK_FALSE(net::Envelope::fromJson(Json::array()).has_value());
}

TEST_CASE("server echoes frames and a mux client correlates refs") {
    net::Server server;
    std::atomic<int> served{0};
    REQUIRE(server.start(kBasePort, [&](std::shared_ptr<net::Conn> conn, net::Envelope e) {
        ++served;
        net::Envelope reply;
        reply.type = "Ack";
        reply.ref = e.ref;
        reply.payload = Json{{"echo", e.payload}};
        conn->send(reply);
    }));

    auto client = net::MuxClient::dial("127.0.0.1", kBasePort);
    REQUIRE(client);
    net::Envelope req;
    req.type = "Ping";
    req.payload = Json{{"i", 1}};
    auto resp = client->call(req, 2000);
    REQUIRE(resp.has_value());
    CHECK(resp->type == "Ack");
    CHECK(resp->payload["echo"]["i"] == 1);

    // Many in-flight calls on one connection come back to their callers.
    std::atomic<int> matched{0};
    std::atomic<int> doneCount{0};
    for (int i = 0; i < 50; ++i) {
        net::Envelope r;
        r.type = "Ping";
        r.payload = Json{{"i", i}};
        client->callAsync(r, [&, i](std::optional<net::Envelope> got) {
            if (got && got->payload["echo"]["i"] == i) ++matched;
            ++doneCount;
        });
    }
    for (int spin = 0; spin < 500 && doneCount.load() < 50; ++spin)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    CHECK(matched.load() == 50);
    CHECK(served.load() == 51);

    client->close();
    server.stop();
}

TEST_CASE("a dead server fails calls instead of hanging") {
    CHECK(net::MuxClient::dial("127.0.0.1", kBasePort + 1) == nullptr);

    net::Server server;
    REQUIRE(server.start(kBasePort + 1, [](std::shared_ptr<net::Conn>, net::Envelope) {
        // never replies
    }));
    auto client = net::MuxClient::dial("127.0.0.1", kBasePort + 1);
    REQUIRE(client);
    net::Envelope req;
    req.type = "Ping";
    auto resp = client->call(req, 100);  // times out
    CHECK_FALSE(resp.has_value());

    // Pending calls fail when the link dies.
    std::atomic<bool> failed{false};
    std::atomic<bool> done{false};
    client->callAsync(req, [&](std::optional<net::Envelope> got) {
        failed = !got.has_value();
        done = true;
    });
    server.stop();
    for (int spin = 0; spin < 500 && !done.load(); ++spin)
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    CHECK(done.load());
    CHECK(failed.load());
}

TEST_CASE("stream refs deliver pushed events in order") {
    net::Server server;
    REQUIRE(server.start(kBasePort + 2, [&](std::shared_ptr<net::Conn> conn, net::Envelope e) {
        if (e.type != "Subscribe") return;
        net::Envelope ack;
        ack.type = "Ack";
        ack.ref = e.ref;
        conn->send(ack);
        for (int i = 0; i < 5; ++i) {
            net::Envelope ev;
            ev.type = "Event";
            ev.ref = e.ref;
            ev.payload = Json{{"seq", i}};
            conn->send(ev);
        }
    }));
    auto client = net::MuxClient::dial("127.0.0.1", kBasePort + 2);
    REQUIRE(client);
    std::mutex mu;
    std::vector<int> seen;
    std::atomic<bool> acked{false};
    net::Envelope sub;
    sub.type = "Subscribe";
    auto ref = client->stream(sub, [&](const net::Envelope& ev) {
        if (ev.type == "Ack") {
            acked = true;
            return;
        }
        std::lock_guard lock(mu);
        seen.push_back(ev.payload["seq"].get<int>());
    });
    CHECK(ref != 0);
    for (int spin = 0; spin < 500; ++spin) {
        {
            std::lock_guard lock(mu);
            if (seen.size() == 5) break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    CHECK(acked.load());
    std::lock_guard lock(mu);
    CHECK(seen == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("frame traffic is counted cumulatively") {
    auto in0 = net::bytesIn();
    auto out0 = net::bytesOut();
    net::Server server;
    REQUIRE(server.start(kBasePort + 3, [](std::shared_ptr<net::Conn> conn, net::Envelope e) {
        net::Envelope r;
        r.type = "Ack";
        r.ref = e.ref;
        conn->send(r);
    }));
    auto client = net::MuxClient::dial("127.0.0.1", kBasePort + 3);
    REQUIRE(client);
    net::Envelope req;
    req.type = "Ping";
    REQUIRE(client->call(req, 2000).has_value());
    CHECK(net::bytesIn() > in0);
    CHECK(net::bytesOut() > out0);
}

TEST_CASE("aux uris are parsed strictly") {
    Bytes blob = canon::stringToBytes("sensor reading 42\n");
    auto uri = makeBlobUri(blob);
    CHECK(uri == std::string(kAuxScheme) + "8c23c341733033da24b7d10951a19135bdab5c9548d08275851b16830f80d897");
    REQUIRE(digestFromUri(uri).has_value());
    CHECK(*digestFromUri(uri) == "8c23c341733033da24b7d10951a19135bdab5c9548d08275851b16830f80d897");

    CHECK_FALSE(digestFromUri("http://sha256/abc").has_value());
    CHECK_FALSE(digestFromUri(std::string(kAuxScheme) + "short").has_value());
    std::string upper = uri;
    upper[upper.size() - 1] = 'F';  // uppercase hex refused
    CHECK_FALSE(digestFromUri(upper).has_value());
    CHECK_FALSE(digestFromUri("").has_value());
}

TEST_CASE("aux store round trips and detects corruption") {
    auto dir = std::filesystem::temp_directory_path() / "aux_store_test";
    std::filesystem::remove_all(dir);
    AuxStore store(dir.string());

    Bytes blob(256);
    std::iota(blob.begin(), blob.end(), 0);
    auto put1 = store.put(blob);
    REQUIRE(std::holds_alternative<std::string>(put1));
    auto uri = std::get<std::string>(put1);
    CHECK(uri == std::string(kAuxScheme) + "40aff2e9d2d8922e47afd4648e6967497158785fbd1da870e7110266bf944880");

    // Idempotent: second put, same URI, still one file.
    auto put2 = store.put(blob);
    REQUIRE(std::holds_alternative<std::string>(put2));
    CHECK(std::get<std::string>(put2) == uri);
    std::size_t files = 0;
    for (auto& entry : std::filesystem::directory_iterator(dir)) {
        (void)entry;
        ++files;
    }
    CHECK(files == 1);

    auto got = store.get(uri);
    REQUIRE(std::holds_alternative<Bytes>(got));
    CHECK(std::get<Bytes>(got) == blob);

    CHECK(AuxStore::verify(uri, blob));
    Bytes other = blob;
    other[10] ^= 1;
    CHECK_FALSE(AuxStore::verify(uri, other));

    auto empty = store.put(Bytes{});
    REQUIRE(std::holds_alternative<AuxError>(empty));
    CHECK(std::get<AuxError>(empty) == AuxError::EmptyBlob);

    auto missing = store.get(std::string(kAuxScheme) + std::string(64, '0'));
    REQUIRE(std::holds_alternative<AuxError>(missing));
    CHECK(std::get<AuxError>(missing) == AuxError::NotFound);

    // Flip one stored byte: reads must fail loudly, never return bad bytes.
    {
        auto path = dir / *digestFromUri(uri);
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(17);
        char c;
        f.seekg(17);
        f.get(c);
        c = static_cast<char>(c ^ 0x40);
        f.seekp(17);
        f.put(c);
    }
    auto corrupted = store.get(uri);
    REQUIRE(std::holds_alternative<AuxError>(corrupted));
    CHECK(std::get<AuxError>(corrupted) == AuxError::IntegrityFailure);

    std::filesystem::remove_all(dir);
}

TEST_CASE("topology configs validate ports modes and policy") {
    TopologyConfig cfg;
    cfg.orgs = {{"org1", 2, 7100}, {"org2", 2, 7110}};
    cfg.ordering.mode = "replicated";
    cfg.ordering.nodes = 3;
    cfg.ordering.basePort = 7200;
    cfg.auxPort = 7400;
    cfg.policyOrgs = {"org1", "org2"};
    cfg.dataDir = "/tmp/net-data";
    CHECK(cfg.validate() == "");

    auto j = cfg.toJson();
    auto back = TopologyConfig::fromJson(j);
    REQUIRE(back.has_value());
    CHECK(back->orgs.size() == 2);
    CHECK(back->ordering.nodes == 3);
    CHECK(back->policyOrgs == cfg.policyOrgs);
    CHECK(back->validate() == "");

    auto bad = cfg;
    bad.orgs[1].basePort = 7101;  // collides with org1 peer 1
    CHECK(bad.validate().find("port") != std::string::npos);

    bad = cfg;
    bad.ordering.nodes = 4;
    CHECK_FALSE(bad.validate().empty());
    bad.ordering.nodes = 2;
    CHECK_FALSE(bad.validate().empty());

    bad = cfg;
    bad.ordering.mode = "solo";
    CHECK_FALSE(bad.validate().empty());  // solo takes exactly one node
    bad.ordering.nodes = 1;
    CHECK(bad.validate() == "");

    bad = cfg;
    bad.policyOrgs = {"org3"};
    CHECK_FALSE(bad.validate().empty());
    bad.policyOrgs = {};
    CHECK_FALSE(bad.validate().empty());

    bad = cfg;
    bad.confirmationThreshold = 0.0;
    CHECK_FALSE(bad.validate().empty());
    bad.confirmationThreshold = 1.5;
    CHECK_FALSE(bad.validate().empty());

    bad = cfg;
    bad.orgs[0].peers = 0;
    CHECK_FALSE(bad.validate().empty());

    bad = cfg;
    bad.orgs.clear();
    CHECK_FALSE(bad.validate().empty());

    CHECK_FALSE(TopologyConfig::fromJson(Json{{"orgs", 3}}).has_value());

    CHECK(TopologyConfig::peerName("org1", 0) == "peer-org1-0");
    CHECK(TopologyConfig::ordererName(2) == "orderer-2");
    CHECK(cfg.peerPort(0, 1) == 7101);
    CHECK(cfg.ordererPort(2) == 7202);
}
