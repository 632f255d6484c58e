#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "iotbc/canon.hpp"
#include "iotbc/ordering.hpp"

namespace iotbc {

struct OrgSpec {
    std::string name;
    int peers = 1;
    int basePort = 0;  // peer k listens on basePort + k
};

struct OrderingSpec {
    std::string mode = "solo";  // "solo" or "replicated"
    int nodes = 1;
    int basePort = 0;  // orderer i listens on basePort + i
    BatchConfig batch;
};

// One file describes the whole network: the orchestrator spawns from it,
// every node process reads its own slice of it, and the CLI resolves
// endpoints through it.
struct TopologyConfig {
    std::vector<OrgSpec> orgs;
    OrderingSpec ordering;
    int auxPort = 0;
    std::set<std::string> policyOrgs;
    int interOrgDelayMs = 0;
    std::string dataDir;
    double confirmationThreshold = 1.0;

    Json toJson() const;
    static std::optional<TopologyConfig> fromJson(const Json& j);

    // Empty string when the config is sane; otherwise the first problem.
    std::string validate() const;

    int peerPort(std::size_t orgIdx, int peerIdx) const;
    int ordererPort(int idx) const;
    int orgIndex(const std::string& name) const;  // -1 when unknown

    // Filesystem layout under dataDir.
    std::string caPath(const std::string& org) const;
    std::string membershipPath() const;
    std::string genesisPath() const;
    std::string nodeWalletPath() const;
    std::string peerDir(const std::string& org, int idx) const;
    std::string ordererDir(int idx) const;
    std::string auxDir() const;
    std::string pidDir() const;
    std::string logDir() const;

    static std::string peerName(const std::string& org, int idx);
    static std::string ordererName(int idx);
};

} // namespace iotbc
