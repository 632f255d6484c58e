#include "iotbc/topology.hpp"

#include <map>

namespace iotbc {

Json TopologyConfig::toJson() const {
    Json orgsJson = Json::array();
    for (const auto& o : orgs)
        orgsJson.push_back(Json{{"name", o.name}, {"peers", o.peers}, {"basePort", o.basePort}});
    return Json{{"orgs", orgsJson},
                {"ordering", Json{{"mode", ordering.mode},
                                  {"nodes", ordering.nodes},
                                  {"basePort", ordering.basePort},
                                  {"batch", ordering.batch.toJson()}}},
                {"auxPort", auxPort},
                {"policyOrgs", policyOrgs},
                {"interOrgDelayMs", interOrgDelayMs},
                {"dataDir", dataDir},
                {"confirmationThreshold", confirmationThreshold}};
}

std::optional<TopologyConfig> TopologyConfig::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    TopologyConfig cfg;
    try {
        for (const auto& o : j.at("orgs")) {
            OrgSpec spec;
            spec.name = o.at("name").get<std::string>();
            spec.peers = o.at("peers").get<int>();
            spec.basePort = o.at("basePort").get<int>();
            cfg.orgs.push_back(std::move(spec));
        }
        const auto& ord = j.at("ordering");
        cfg.ordering.mode = ord.at("mode").get<std::string>();
        cfg.ordering.nodes = ord.at("nodes").get<int>();
        cfg.ordering.basePort = ord.at("basePort").get<int>();
        if (ord.contains("batch")) {
            auto batch = BatchConfig::fromJson(ord.at("batch"));
            if (!batch) return std::nullopt;
            cfg.ordering.batch = *batch;
        }
        cfg.auxPort = j.value("auxPort", 0);
        if (j.contains("policyOrgs"))
            for (const auto& p : j.at("policyOrgs")) cfg.policyOrgs.insert(p.get<std::string>());
        cfg.interOrgDelayMs = j.value("interOrgDelayMs", 0);
        cfg.dataDir = j.at("dataDir").get<std::string>();
        cfg.confirmationThreshold = j.value("confirmationThreshold", 1.0);
    } catch (const Json::exception&) {
        return std::nullopt;
    }
    return cfg;
}

std::string TopologyConfig::validate() const {
    if (orgs.empty()) return "at least one org required";
    std::set<std::string> names;
    for (const auto& o : orgs) {
        if (o.name.empty() || o.name.find('/') != std::string::npos)
            return "org name empty or contains '/'";
        if (!names.insert(o.name).second) return "duplicate org name: " + o.name;
        if (o.peers < 1) return "org " + o.name + " needs at least one peer";
    }
    if (ordering.mode == "solo") {
        if (ordering.nodes != 1) return "solo ordering takes exactly one node";
    } else if (ordering.mode == "replicated") {
        if (ordering.nodes < 3 || ordering.nodes % 2 == 0)
            return "replicated ordering needs an odd node count of at least 3";
    } else {
        return "unknown ordering mode: " + ordering.mode;
    }
    if (!ordering.batch.valid()) return "invalid batch config";
    if (policyOrgs.empty()) return "endorsement policy org set is empty";
    for (const auto& p : policyOrgs)
        if (!names.count(p)) return "policy org not in topology: " + p;
    if (confirmationThreshold <= 0.0 || confirmationThreshold > 1.0)
        return "confirmation threshold must be in (0,1]";
    if (dataDir.empty()) return "dataDir required";
    if (interOrgDelayMs < 0) return "interOrgDelayMs must be nonnegative";

    std::map<int, std::string> ports;
    auto claim = [&](int port, const std::string& who) -> std::string {
        if (port < 1024 || port > 65535) return who + " port out of range: " + std::to_string(port);
        auto [it, fresh] = ports.emplace(port, who);
        if (!fresh) return "port " + std::to_string(port) + " used by both " + it->second + " and " + who;
        return "";
    };
    for (std::size_t i = 0; i < orgs.size(); ++i)
        for (int k = 0; k < orgs[i].peers; ++k)
            if (auto err = claim(peerPort(i, k), peerName(orgs[i].name, k)); !err.empty()) return err;
    for (int i = 0; i < ordering.nodes; ++i)
        if (auto err = claim(ordererPort(i), ordererName(i)); !err.empty()) return err;
    if (auxPort != 0)
        if (auto err = claim(auxPort, "aux"); !err.empty()) return err;
    return "";
}

int TopologyConfig::peerPort(std::size_t orgIdx, int peerIdx) const {
    return orgs[orgIdx].basePort + peerIdx;
}

int TopologyConfig::ordererPort(int idx) const { return ordering.basePort + idx; }

int TopologyConfig::orgIndex(const std::string& name) const {
    for (std::size_t i = 0; i < orgs.size(); ++i)
        if (orgs[i].name == name) return static_cast<int>(i);
    return -1;
}

std::string TopologyConfig::caPath(const std::string& org) const {
    return dataDir + "/ca/" + org + ".json";
}
std::string TopologyConfig::membershipPath() const { return dataDir + "/membership.json"; }
std::string TopologyConfig::genesisPath() const { return dataDir + "/genesis.json"; }
std::string TopologyConfig::nodeWalletPath() const { return dataDir + "/wallets/nodes.json"; }
std::string TopologyConfig::peerDir(const std::string& org, int idx) const {
    return dataDir + "/peers/" + peerName(org, idx);
}
std::string TopologyConfig::ordererDir(int idx) const {
    return dataDir + "/orderers/" + ordererName(idx);
}
std::string TopologyConfig::auxDir() const { return dataDir + "/aux"; }
std::string TopologyConfig::pidDir() const { return dataDir + "/pids"; }
std::string TopologyConfig::logDir() const { return dataDir + "/logs"; }

std::string TopologyConfig::peerName(const std::string& org, int idx) {
    return "peer-" + org + "-" + std::to_string(idx);
}
std::string TopologyConfig::ordererName(int idx) { return "orderer-" + std::to_string(idx); }

} // namespace iotbc
