#include "iotbc/orchestrator.hpp"

#include <csignal>
#include <fcntl.h>
#include <filesystem>
#include <ostream>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>
#include <vector>

#include "iotbc/execution.hpp"
#include "iotbc/ledger.hpp"
#include "iotbc/net.hpp"

namespace iotbc {

namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kDayMs = 24LL * 3600 * 1000;
constexpr std::int64_t kCertLifetimeMs = 3650 * kDayMs;

std::string pidPath(const TopologyConfig& topo, const std::string& name) {
    return topo.pidDir() + "/" + name + ".pid";
}

std::string logPath(const TopologyConfig& topo, const std::string& name) {
    return topo.logDir() + "/" + name + ".log";
}

bool processAlive(pid_t pid) { return pid > 0 && ::kill(pid, 0) == 0; }

std::optional<pid_t> readPid(const std::string& path) {
    auto j = loadJsonFile(path);
    if (!j) return std::nullopt;
    auto pid = j->value("pid", 0);
    if (pid <= 0) return std::nullopt;
    return static_cast<pid_t>(pid);
}

// Detached child: own session, stdout/stderr into the node's log file.
std::optional<pid_t> spawnNode(const TopologyConfig& topo, const std::string& nodeBinary,
                               const std::string& name, const std::vector<std::string>& args) {
    pid_t pid = ::fork();
    if (pid < 0) return std::nullopt;
    if (pid == 0) {
        ::setsid();
        int logFd = ::open(logPath(topo, name).c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
        if (logFd >= 0) {
            ::dup2(logFd, STDOUT_FILENO);
            ::dup2(logFd, STDERR_FILENO);
            ::close(logFd);
        }
        std::vector<char*> argv;
        argv.push_back(const_cast<char*>(nodeBinary.c_str()));
        for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        ::execv(nodeBinary.c_str(), argv.data());
        _exit(127);
    }
    if (!saveJsonFile(pidPath(topo, name), Json{{"pid", pid}, {"name", name}})) {
        ::kill(pid, SIGKILL);
        return std::nullopt;
    }
    return pid;
}

bool pingOk(int port) {
    auto mux = net::MuxClient::dial("127.0.0.1", port);
    if (!mux) return false;
    net::Envelope e;
    e.type = "Ping";
    auto resp = mux->call(std::move(e), 2000);
    return resp && resp->type == "Ack";
}

bool awaitReady(int port, int timeoutMs) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeoutMs);
    while (std::chrono::steady_clock::now() < deadline) {
        if (pingOk(port)) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    return false;
}

struct Launch {
    std::string name;
    std::vector<std::string> args;
    int port;
};

std::vector<Launch> launchPlan(const TopologyConfig& topo, const std::string& configPath) {
    std::vector<Launch> plan;
    for (int i = 0; i < topo.ordering.nodes; ++i)
        plan.push_back({TopologyConfig::ordererName(i),
                        {"--role", "orderer", "--config", configPath, "--index", std::to_string(i)},
                        topo.ordererPort(i)});
    for (std::size_t o = 0; o < topo.orgs.size(); ++o)
        for (int p = 0; p < topo.orgs[o].peers; ++p)
            plan.push_back({TopologyConfig::peerName(topo.orgs[o].name, p),
                            {"--role", "peer", "--config", configPath, "--org", topo.orgs[o].name,
                             "--index", std::to_string(p)},
                            topo.peerPort(o, p)});
    plan.push_back({"aux", {"--role", "aux", "--config", configPath}, topo.auxPort});
    return plan;
}

} // namespace

std::string provisionMaterial(const TopologyConfig& topo) {
    std::error_code ec;
    for (const auto& dir :
         {topo.dataDir, topo.dataDir + "/ca", topo.dataDir + "/wallets", topo.pidDir(),
          topo.logDir(), topo.auxDir()}) {
        fs::create_directories(dir, ec);
        if (ec) return "cannot create " + dir + ": " + ec.message();
    }

    std::int64_t now = canon::nowMs();
    std::int64_t notBefore = now - kDayMs;
    std::int64_t notAfter = now + kCertLifetimeMs;

    // CAs first; existing ones are reused so keys stay stable.
    std::vector<CertificateAuthority> cas;
    for (const auto& org : topo.orgs) {
        auto path = topo.caPath(org.name);
        if (auto j = loadJsonFile(path)) {
            auto ca = CertificateAuthority::fromJson(*j);
            if (!ca) return "corrupt CA file: " + path;
            cas.push_back(std::move(*ca));
            continue;
        }
        auto ca = CertificateAuthority::create(org.name, notBefore, notAfter);
        if (!saveJsonFile(path, ca.toJson())) return "cannot write " + path;
        cas.push_back(std::move(ca));
    }

    if (!fs::exists(topo.membershipPath())) {
        MembershipDirectory members;
        for (const auto& ca : cas)
            members.rootCerts[ca.orgId()] = ca.root().certificate.publicKey;
        if (!saveJsonFile(topo.membershipPath(), members.toJson()))
            return "cannot write " + topo.membershipPath();
    }

    if (!fs::exists(topo.genesisPath())) {
        if (!saveJsonFile(topo.genesisPath(), Block::makeGenesis().toJson()))
            return "cannot write " + topo.genesisPath();
    }

    // Peer identities; the wallet is rewritten whole but labels are
    // only added, never replaced.
    Wallet wallet;
    if (auto j = loadJsonFile(topo.nodeWalletPath())) {
        auto w = Wallet::fromJson(*j);
        if (!w) return "corrupt wallet: " + topo.nodeWalletPath();
        wallet = std::move(*w);
    }
    bool walletDirty = false;
    for (std::size_t o = 0; o < topo.orgs.size(); ++o) {
        for (int p = 0; p < topo.orgs[o].peers; ++p) {
            auto label = TopologyConfig::peerName(topo.orgs[o].name, p);
            if (wallet.get(label)) continue;
            wallet.put(label, cas[o].issue(label, Role::Admin, notBefore, notAfter));
            walletDirty = true;
        }
    }
    if (walletDirty) {
        // Issuing bumped the CA serial counters; persist both sides.
        for (std::size_t o = 0; o < topo.orgs.size(); ++o)
            if (!saveJsonFile(topo.caPath(topo.orgs[o].name), cas[o].toJson()))
                return "cannot write " + topo.caPath(topo.orgs[o].name);
        if (!saveJsonFile(topo.nodeWalletPath(), wallet.toJson()))
            return "cannot write " + topo.nodeWalletPath();
    }
    return "";
}

std::string networkUp(const TopologyConfig& topo, const std::string& nodeBinary,
                      std::ostream* log) {
    if (auto err = topo.validate(); !err.empty()) return err;
    if (!fs::exists(nodeBinary)) return "node binary not found: " + nodeBinary;
    if (auto err = provisionMaterial(topo); !err.empty()) return err;

    // The node processes read the topology from a file of our making,
    // so a config handed in by path stays authoritative even if the
    // caller edits it later.
    auto configPath = topo.dataDir + "/topology.json";
    if (!saveJsonFile(configPath, topo.toJson())) return "cannot write " + configPath;

    auto plan = launchPlan(topo, configPath);
    for (const auto& l : plan) {
        if (auto pid = readPid(pidPath(topo, l.name)); pid && processAlive(*pid))
            return l.name + " already running (pid " + std::to_string(*pid) + ")";
    }

    std::vector<std::string> started;
    auto rollback = [&] {
        for (const auto& name : started) {
            if (auto pid = readPid(pidPath(topo, name)); pid && processAlive(*pid))
                ::kill(*pid, SIGKILL);
            fs::remove(pidPath(topo, name));
        }
    };

    for (const auto& l : plan) {
        auto pid = spawnNode(topo, nodeBinary, l.name, l.args);
        if (!pid) {
            rollback();
            return "failed to spawn " + l.name;
        }
        started.push_back(l.name);
        if (log) *log << "started " << l.name << " (pid " << *pid << ")\n";
    }

    for (const auto& l : plan) {
        if (!awaitReady(l.port, 15000)) {
            rollback();
            return l.name + " did not become ready on port " + std::to_string(l.port);
        }
        if (log) *log << l.name << " ready on port " << l.port << "\n";
    }
    return "";
}

std::string networkDown(const TopologyConfig& topo, std::ostream* log) {
    if (!fs::exists(topo.pidDir())) return "";
    std::vector<std::pair<std::string, pid_t>> live;
    for (const auto& entry : fs::directory_iterator(topo.pidDir())) {
        if (entry.path().extension() != ".pid") continue;
        auto pid = readPid(entry.path().string());
        if (pid && processAlive(*pid)) {
            ::kill(*pid, SIGTERM);
            live.emplace_back(entry.path().stem().string(), *pid);
        }
        fs::remove(entry.path());
    }
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    for (const auto& [name, pid] : live) {
        while (processAlive(pid) && std::chrono::steady_clock::now() < deadline)
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        if (processAlive(pid)) {
            ::kill(pid, SIGKILL);
            if (log) *log << name << " killed\n";
        } else if (log) {
            *log << name << " stopped\n";
        }
    }
    return "";
}

std::optional<Identity> issueIdentity(const TopologyConfig& topo, const std::string& org,
                                      const std::string& subject, Role role, std::string& error) {
    auto j = loadJsonFile(topo.caPath(org));
    if (!j) {
        error = "no CA for org " + org + " (run network up first)";
        return std::nullopt;
    }
    auto ca = CertificateAuthority::fromJson(*j);
    if (!ca) {
        error = "corrupt CA file for org " + org;
        return std::nullopt;
    }
    std::int64_t now = canon::nowMs();
    auto id = ca->issue(subject, role, now - kDayMs, now + kCertLifetimeMs);
    if (!saveJsonFile(topo.caPath(org), ca->toJson())) {
        error = "cannot persist CA serial counter";
        return std::nullopt;
    }
    return id;
}

std::string revokeIdentity(const TopologyConfig& topo, const std::string& org,
                           std::int64_t serial) {
    auto j = loadJsonFile(topo.membershipPath());
    if (!j) return "no membership file (run network up first)";
    auto members = MembershipDirectory::fromJson(*j);
    if (!members) return "corrupt membership file";
    if (!members->revoke(org, serial)) return "unknown org: " + org;
    if (!saveJsonFile(topo.membershipPath(), members->toJson()))
        return "cannot write membership file";
    return "";
}

std::string verifyLedgers(const TopologyConfig& topo, std::ostream* log) {
    auto j = loadJsonFile(topo.membershipPath());
    if (!j) return "no membership file";
    auto members = MembershipDirectory::fromJson(*j);
    if (!members) return "corrupt membership file";
    EndorsementPolicy policy;
    for (const auto& org : topo.policyOrgs) policy.orgSet.insert(org);

    struct Head {
        std::string peer;
        std::vector<Block> blocks;
    };
    std::vector<Head> heads;

    for (std::size_t o = 0; o < topo.orgs.size(); ++o) {
        for (int p = 0; p < topo.orgs[o].peers; ++p) {
            auto name = TopologyConfig::peerName(topo.orgs[o].name, p);
            auto path = topo.peerDir(topo.orgs[o].name, p) + "/blocks.bin";
            auto store = BlockStore::open(path);
            if (!store) return name + ": cannot open block store";
            if (auto bad = store->verifyChain())
                return name + ": chain broken at block " + std::to_string(*bad);

            Validator validator(*members, policy);
            WorldState state;
            for (const auto& block : store->blocks()) {
                auto codes = validator.validateBlock(state, block);
                if (codes != block.commitMetadata)
                    return name + ": stored validation codes diverge at block " +
                           std::to_string(block.number);
            }
            if (log)
                *log << name << ": " << store->height() << " blocks, state "
                     << state.contentHash() << "\n";
            heads.push_back({name, store->blocks()});
        }
    }

    // Pairwise prefix agreement: any two peers must tell the same story
    // up to the shorter chain.
    for (std::size_t a = 0; a + 1 < heads.size(); ++a) {
        const auto& x = heads[a];
        const auto& y = heads[a + 1];
        auto common = std::min(x.blocks.size(), y.blocks.size());
        if (common == 0) continue;
        auto hx = computeBlockHash(x.blocks[common - 1]);
        auto hy = computeBlockHash(y.blocks[common - 1]);
        if (hx != hy)
            return x.peer + " and " + y.peer + " disagree at block " + std::to_string(common - 1);
    }
    return "";
}

} // namespace iotbc
