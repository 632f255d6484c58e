// One node process: a peer, an orderer, or the blob service, chosen by
// --role. Runs until SIGTERM/SIGINT, then shuts down cleanly so block
// and raft files are left whole.

#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "iotbc/auxstore.hpp"
#include "iotbc/orderer.hpp"
#include "iotbc/peer.hpp"
#include "iotbc/procstats.hpp"

using namespace iotbc;

namespace {

int waitForSignal() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGTERM);
    sigaddset(&set, SIGINT);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    int sig = 0;
    sigwait(&set, &sig);
    return sig;
}

int runAux(const TopologyConfig& topo) {
    AuxStore store(topo.auxDir());
    net::Server server;
    auto startMs = canon::nowMs();
    bool ok = server.start(topo.auxPort, [&](std::shared_ptr<net::Conn> conn, net::Envelope e) {
        if (e.type == "Ping") {
            conn->send(net::makeAck(e.ref, Json{{"node", "aux"}}));
        } else if (e.type == "AuxPut") {
            auto data = canon::fromB64(e.payload.value("data", ""));
            if (!data) {
                conn->send(net::makeError(e.ref, "bad_request", "data is not base64"));
                return;
            }
            auto res = store.put(*data);
            if (auto* uri = std::get_if<std::string>(&res))
                conn->send(net::makeAck(e.ref, Json{{"uri", *uri}}));
            else
                conn->send(net::makeError(e.ref, auxErrorToString(std::get<AuxError>(res)),
                                          "put refused"));
        } else if (e.type == "AuxGet") {
            auto res = store.get(e.payload.value("uri", ""));
            if (auto* data = std::get_if<Bytes>(&res))
                conn->send(net::makeAck(e.ref, Json{{"data", canon::b64(*data)}}));
            else
                conn->send(net::makeError(e.ref, auxErrorToString(std::get<AuxError>(res)),
                                          "get refused"));
        } else if (e.type == "Stats") {
            auto ps = readProcStats();
            conn->send(net::makeAck(e.ref, Json{{"cpuTicks", ps.cpuTicks},
                                                {"ticksPerSecond", ps.ticksPerSecond},
                                                {"memBytes", ps.memBytes},
                                                {"diskReadBytes", ps.diskReadBytes},
                                                {"diskWriteBytes", ps.diskWriteBytes},
                                                {"netInBytes", net::bytesIn()},
                                                {"netOutBytes", net::bytesOut()},
                                                {"startMs", startMs},
                                                {"timeMs", canon::nowMs()}}));
        } else {
            conn->send(net::makeError(e.ref, "bad_type", "unknown message type: " + e.type));
        }
    });
    if (!ok) {
        std::cerr << "aux: cannot listen on port " << topo.auxPort << "\n";
        return 2;
    }
    std::cout << "aux: serving " << store.root() << " on port " << topo.auxPort << std::endl;
    waitForSignal();
    server.stop();
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"consortium node process"};
    std::string role, configPath, org;
    int index = 0;
    app.add_option("--role", role, "peer | orderer | aux")->required();
    app.add_option("--config", configPath, "topology file")->required();
    app.add_option("--org", org, "organization (peers only)");
    app.add_option("--index", index, "node index within its group");
    CLI11_PARSE(app, argc, argv);

    crypto::init();

    auto topoJson = loadJsonFile(configPath);
    if (!topoJson) {
        std::cerr << "cannot read " << configPath << "\n";
        return 2;
    }
    auto topo = TopologyConfig::fromJson(*topoJson);
    if (!topo) {
        std::cerr << "malformed topology in " << configPath << "\n";
        return 2;
    }
    if (auto err = topo->validate(); !err.empty()) {
        std::cerr << "invalid topology: " << err << "\n";
        return 2;
    }

    if (role == "aux") return runAux(*topo);

    auto genesisJson = loadJsonFile(topo->genesisPath());
    auto genesis = genesisJson ? Block::fromJson(*genesisJson) : std::nullopt;
    if (!genesis) {
        std::cerr << "cannot load genesis from " << topo->genesisPath() << "\n";
        return 2;
    }

    if (role == "orderer") {
        OrdererNode node{OrdererNode::Options{*topo, index, *genesis, topo->ordererDir(index)}};
        if (!node.start()) {
            std::cerr << "orderer " << index << " failed to start\n";
            return 2;
        }
        std::cout << TopologyConfig::ordererName(index) << ": up on port "
                  << topo->ordererPort(index) << std::endl;
        waitForSignal();
        node.stop();
        return 0;
    }

    if (role == "peer") {
        auto walletJson = loadJsonFile(topo->nodeWalletPath());
        auto wallet = walletJson ? Wallet::fromJson(*walletJson) : std::nullopt;
        if (!wallet) {
            std::cerr << "cannot load node wallet\n";
            return 2;
        }
        auto label = TopologyConfig::peerName(org, index);
        const auto* identity = wallet->get(label);
        if (!identity) {
            std::cerr << "no identity for " << label << " in node wallet\n";
            return 2;
        }
        PeerNode node{PeerNode::Options{*topo, org, index, *identity, *genesis}};
        if (!node.start()) {
            std::cerr << label << " failed to start\n";
            return 2;
        }
        std::cout << label << ": up on port "
                  << topo->peerPort(topo->orgIndex(org), index) << std::endl;
        waitForSignal();
        node.stop();
        return 0;
    }

    std::cerr << "unknown role: " << role << "\n";
    return 2;
}
