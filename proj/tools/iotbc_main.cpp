// Operator CLI: network lifecycle, identity management, ledger audit,
// benchmarks, blob transfer, and a scripted end-to-end demo.
// Exit codes: 0 success, 1 bad input, 2 runtime failure.

#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>

#include "CLI11.hpp"
#include "iotbc/auxstore.hpp"
#include "iotbc/bench.hpp"
#include "iotbc/client.hpp"
#include "iotbc/orchestrator.hpp"

using namespace iotbc;

namespace {

constexpr int kOk = 0;
constexpr int kBadInput = 1;
constexpr int kRuntime = 2;

std::optional<TopologyConfig> loadTopology(const std::string& path, int& rc) {
    auto j = loadJsonFile(path);
    if (!j) {
        std::cerr << "cannot read " << path << "\n";
        rc = kBadInput;
        return std::nullopt;
    }
    auto topo = TopologyConfig::fromJson(*j);
    if (!topo) {
        std::cerr << "malformed topology in " << path << "\n";
        rc = kBadInput;
        return std::nullopt;
    }
    if (auto err = topo->validate(); !err.empty()) {
        std::cerr << "invalid topology: " << err << "\n";
        rc = kBadInput;
        return std::nullopt;
    }
    rc = kOk;
    return topo;
}

std::string siblingBinary(const char* name) {
    std::error_code ec;
    auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (ec) return name;
    return (self.parent_path() / name).string();
}

int cmdNetworkUp(const std::string& configPath, std::string nodeBinary) {
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;
    if (nodeBinary.empty()) nodeBinary = siblingBinary("iotbc-node");
    if (auto err = networkUp(*topo, nodeBinary, &std::cout); !err.empty()) {
        std::cerr << "network up failed: " << err << "\n";
        return kRuntime;
    }
    std::cout << "network is up\n";
    return kOk;
}

int cmdNetworkDown(const std::string& configPath) {
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;
    if (auto err = networkDown(*topo, &std::cout); !err.empty()) {
        std::cerr << "network down failed: " << err << "\n";
        return kRuntime;
    }
    std::cout << "network is down\n";
    return kOk;
}

int cmdIdentityIssue(const std::string& configPath, const std::string& org,
                     const std::string& subject, const std::string& roleName,
                     const std::string& outPath) {
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;
    auto role = roleFromString(roleName);
    if (!role) {
        std::cerr << "unknown role: " << roleName << " (want admin|writer|reader)\n";
        return kBadInput;
    }
    std::string err;
    auto id = issueIdentity(*topo, org, subject, *role, err);
    if (!id) {
        std::cerr << "issue failed: " << err << "\n";
        return kRuntime;
    }
    if (!outPath.empty()) {
        if (!saveJsonFile(outPath, id->toJson())) {
            std::cerr << "cannot write " << outPath << "\n";
            return kRuntime;
        }
    } else {
        std::cout << canon::dump(id->toJson()) << "\n";
    }
    std::cerr << "issued serial " << id->certificate.serial << " deviceId "
              << deriveDeviceId(id->certificate) << "\n";
    return kOk;
}

int cmdIdentityRevoke(const std::string& configPath, const std::string& org,
                      std::int64_t serial) {
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;
    if (auto err = revokeIdentity(*topo, org, serial); !err.empty()) {
        std::cerr << "revoke failed: " << err << "\n";
        return kRuntime;
    }
    std::cout << "revoked " << org << " serial " << serial << "\n";
    return kOk;
}

int cmdLedgerVerify(const std::string& configPath) {
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;
    if (auto err = verifyLedgers(*topo, &std::cout); !err.empty()) {
        std::cerr << "ledger verify failed: " << err << "\n";
        return kRuntime;
    }
    std::cout << "all peer ledgers verify\n";
    return kOk;
}

int cmdBenchRun(std::string configPath, const std::string& workloadPath,
                const std::string& outDir) {
    auto wj = loadJsonFile(workloadPath);
    if (!wj) {
        std::cerr << "cannot read " << workloadPath << "\n";
        return kBadInput;
    }
    auto spec = bench::WorkloadSpec::fromJson(*wj);
    if (!spec) {
        std::cerr << "malformed workload in " << workloadPath << "\n";
        return kBadInput;
    }
    if (auto err = spec->validate(); !err.empty()) {
        std::cerr << "invalid workload: " << err << "\n";
        return kBadInput;
    }
    if (configPath.empty()) configPath = wj->value("configPath", "");
    if (configPath.empty()) {
        std::cerr << "no topology: pass --config or put configPath in the workload file\n";
        return kBadInput;
    }
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;

    std::cout << "running " << spec->name << " (" << spec->totalOps << " x " << spec->operation
              << ", load " << spec->fixedLoad << ")...\n";
    std::string err;
    auto result = bench::runWorkload(*spec, *topo, err);
    if (!result) {
        std::cerr << "bench failed: " << err << "\n";
        return kRuntime;
    }
    if (!bench::writeReport({*result}, outDir, err)) {
        std::cerr << "cannot write report: " << err << "\n";
        return kRuntime;
    }
    std::cout << bench::formatTable({*result});
    std::cout << "report written to " << outDir << "\n";
    return result->aborted ? kRuntime : kOk;
}

int cmdAuxPut(const std::string& configPath, const std::string& filePath) {
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;
    std::ifstream in(filePath, std::ios::binary);
    if (!in) {
        std::cerr << "cannot read " << filePath << "\n";
        return kBadInput;
    }
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string err;
    auto uri = auxPut("127.0.0.1", topo->auxPort, data, &err);
    if (!uri) {
        std::cerr << "put failed: " << err << "\n";
        return kRuntime;
    }
    std::cout << *uri << "\n";
    return kOk;
}

int cmdAuxGet(const std::string& configPath, const std::string& uri, const std::string& outPath) {
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;
    std::string err;
    auto data = auxGet("127.0.0.1", topo->auxPort, uri, &err);
    if (!data) {
        std::cerr << "get failed: " << err << "\n";
        return kRuntime;
    }
    std::ofstream out(outPath, std::ios::binary | std::ios::trunc);
    if (!out) {
        std::cerr << "cannot write " << outPath << "\n";
        return kRuntime;
    }
    out.write(reinterpret_cast<const char*>(data->data()),
              static_cast<std::streamsize>(data->size()));
    std::cout << "wrote " << data->size() << " bytes to " << outPath << "\n";
    return kOk;
}

// The whole story on one screen: a device offers a temperature service,
// an application calls it, the reading travels through the blob store,
// and every chain step prints its txId and validation code.
int cmdDemoRun(const std::string& configPath) {
    int rc;
    auto topo = loadTopology(configPath, rc);
    if (!topo) return rc;

    auto step = [](const std::string& what, const SubmitResult& r) {
        std::cout << "  [" << (r.valid() ? "VALID" : (r.code.empty() ? r.error : r.code)) << "] "
                  << what << "  txId=" << (r.txId.empty() ? "-" : r.txId) << "\n";
        return r.valid();
    };

    std::string err;
    auto deviceId = issueIdentity(*topo, topo->orgs[0].name, "demo-thermometer", Role::Writer, err);
    if (!deviceId) {
        std::cerr << "cannot issue device identity: " << err << "\n";
        return kRuntime;
    }
    auto appOrg = topo->orgs[topo->orgs.size() > 1 ? 1 : 0].name;
    auto appId = issueIdentity(*topo, appOrg, "demo-app", Role::Writer, err);
    if (!appId) {
        std::cerr << "cannot issue app identity: " << err << "\n";
        return kRuntime;
    }

    GatewayClient device("127.0.0.1", topo->peerPort(0, 0), *deviceId);
    GatewayClient app("127.0.0.1", topo->peerPort(topo->orgs.size() > 1 ? 1 : 0, 0), *appId);
    if (!device.connected() || !app.connected()) {
        std::cerr << "cannot reach peers (is the network up?)\n";
        return kRuntime;
    }

    const std::string org = topo->orgs[0].name;
    const std::string devId = deriveDeviceId(deviceId->certificate);

    std::cout << "device " << devId.substr(0, 12) << "... comes online\n";
    if (!step("register device", device.submit("register_device", {"demo-thermo", "desk demo"})))
        return kRuntime;
    if (!step("register service read-temp",
              device.submit("register_service", {"read-temp", "1", "current temperature"})))
        return kRuntime;

    // The device reacts to request events; the mutex hands the request
    // id from the subscription thread to the main script.
    std::mutex mu;
    std::condition_variable cv;
    std::string pendingRequest;
    bool subscribed = device.subscribe(
        Json{{"organizationId", org}, {"deviceId", devId}}, std::nullopt, [&](const Json& ev) {
            if (ev.value("contractOp", "") != "request_service") return;
            std::lock_guard lock(mu);
            pendingRequest = ev.value("requestId", "");
            cv.notify_all();
        });
    if (!subscribed) {
        std::cerr << "device subscription refused\n";
        return kRuntime;
    }
    std::cout << "device subscribed to its own request feed\n";

    auto services = app.evaluate("get_all_services", {org});
    std::cout << "  app discovers " << (services.ok ? services.value.size() : 0)
              << " service(s) in " << org << "\n";
    if (!services.ok) return kRuntime;

    Json reqJson{{"id", GatewayClient::makeTxId()},
                 {"time", canon::formatTimeMs(canon::nowMs())},
                 {"service",
                  Json{{"name", "read-temp"}, {"deviceId", devId}, {"organizationId", org}}},
                 {"method", "read"},
                 {"arguments", Json::array()}};
    if (!step("request read-temp", app.submit("request_service", {canon::dump(reqJson)})))
        return kRuntime;

    std::string requestId;
    {
        std::unique_lock lock(mu);
        if (!cv.wait_for(lock, std::chrono::seconds(10), [&] { return !pendingRequest.empty(); })) {
            std::cerr << "device never saw the request event\n";
            return kRuntime;
        }
        requestId = pendingRequest;
    }
    std::cout << "  device received request " << requestId << " via event\n";

    // The reading itself goes to the blob store; only its URI (which
    // embeds the digest) rides the chain.
    Bytes reading = canon::stringToBytes("temperature=21.5C sampled=" +
                                         canon::formatTimeMs(canon::nowMs()));
    auto uri = auxPut("127.0.0.1", topo->auxPort, reading, &err);
    if (!uri) {
        std::cerr << "blob put failed: " << err << "\n";
        return kRuntime;
    }
    std::cout << "  device stored reading at " << *uri << "\n";

    Json rspJson{{"requestId", requestId},
                 {"time", canon::formatTimeMs(canon::nowMs())},
                 {"statusCode", 200},
                 {"returnValue", canon::b64(canon::stringToBytes(*uri))}};
    if (!step("respond with blob URI", device.submit("respond_to_request", {canon::dump(rspJson)})))
        return kRuntime;

    auto rsp = app.evaluate("get_response", {requestId});
    if (!rsp.ok) {
        std::cerr << "app cannot read the response\n";
        return kRuntime;
    }
    auto uriBytes = canon::fromB64(rsp.value.value("returnValue", ""));
    std::string fetchUri = uriBytes ? canon::bytesToString(*uriBytes) : "";
    auto blob = auxGet("127.0.0.1", topo->auxPort, fetchUri, &err);
    if (!blob) {
        std::cerr << "blob fetch failed: " << err << "\n";
        return kRuntime;
    }
    if (!AuxStore::verify(fetchUri, *blob)) {
        std::cerr << "blob digest mismatch\n";
        return kRuntime;
    }
    std::cout << "  app fetched and verified the reading: \"" << canon::bytesToString(*blob)
              << "\"\n";

    if (!step("remove request", app.submit("remove_request", {requestId}))) return kRuntime;
    if (!step("deregister service", device.submit("deregister_service", {"read-temp"})))
        return kRuntime;
    if (!step("deregister device", device.submit("deregister_device", {org, devId})))
        return kRuntime;

    std::cout << "demo complete: every transaction committed VALID\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"consortium IoT service platform"};
    app.require_subcommand(1);
    crypto::init();

    std::string configPath, nodeBinary, org, subject, roleName, outPath, workloadPath, uri,
        filePath;
    std::int64_t serial = 0;

    auto* network = app.add_subcommand("network", "start or stop the whole network");
    auto* up = network->add_subcommand("up", "provision material and launch all nodes");
    up->add_option("--config", configPath, "topology file")->required();
    up->add_option("--node-binary", nodeBinary, "path to iotbc-node");
    auto* down = network->add_subcommand("down", "stop every node from its pidfile");
    down->add_option("--config", configPath, "topology file")->required();

    auto* identity = app.add_subcommand("identity", "issue or revoke member identities");
    auto* issue = identity->add_subcommand("issue", "issue a new identity from an org CA");
    issue->add_option("--config", configPath, "topology file")->required();
    issue->add_option("--org", org, "organization")->required();
    issue->add_option("--subject", subject, "certificate subject")->required();
    issue->add_option("--role", roleName, "admin | writer | reader")->required();
    issue->add_option("--out", outPath, "write the identity here instead of stdout");
    auto* revoke = identity->add_subcommand("revoke", "revoke a serial via the membership list");
    revoke->add_option("--config", configPath, "topology file")->required();
    revoke->add_option("--org", org, "organization")->required();
    revoke->add_option("--serial", serial, "certificate serial")->required();

    auto* ledger = app.add_subcommand("ledger", "audit peer ledgers");
    auto* verify = ledger->add_subcommand("verify", "recompute chains and validation codes");
    verify->add_option("--config", configPath, "topology file")->required();

    auto* benchCmd = app.add_subcommand("bench", "run benchmark workloads");
    auto* run = benchCmd->add_subcommand("run", "drive one workload and write a report");
    run->add_option("--workload", workloadPath, "workload file")->required();
    run->add_option("--out", outPath, "report directory")->required();
    run->add_option("--config", configPath, "topology file (overrides workload configPath)");

    auto* aux = app.add_subcommand("aux", "move blobs in and out of the aux store");
    auto* put = aux->add_subcommand("put", "store a file, print its URI");
    put->add_option("--config", configPath, "topology file")->required();
    put->add_option("--file", filePath, "file to store")->required();
    auto* get = aux->add_subcommand("get", "fetch a URI into a file");
    get->add_option("--config", configPath, "topology file")->required();
    get->add_option("--uri", uri, "blob URI")->required();
    get->add_option("--out", outPath, "output file")->required();

    auto* demo = app.add_subcommand("demo", "scripted end-to-end walkthrough");
    auto* demoRun = demo->add_subcommand("run", "device + app service round trip");
    demoRun->add_option("--config", configPath, "topology file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kBadInput;
    }

    if (up->parsed()) return cmdNetworkUp(configPath, nodeBinary);
    if (down->parsed()) return cmdNetworkDown(configPath);
    if (issue->parsed()) return cmdIdentityIssue(configPath, org, subject, roleName, outPath);
    if (revoke->parsed()) return cmdIdentityRevoke(configPath, org, serial);
    if (verify->parsed()) return cmdLedgerVerify(configPath);
    if (run->parsed()) return cmdBenchRun(configPath, workloadPath, outPath);
    if (put->parsed()) return cmdAuxPut(configPath, filePath);
    if (get->parsed()) return cmdAuxGet(configPath, uri, outPath);
    if (demoRun->parsed()) return cmdDemoRun(configPath);

    std::cerr << app.help();
    return kBadInput;
}
