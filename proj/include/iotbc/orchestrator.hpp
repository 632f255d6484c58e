#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "iotbc/identity.hpp"
#include "iotbc/topology.hpp"

namespace iotbc {

// Process-level network management: crypto material layout, node
// process lifecycle via pidfiles, and offline chain verification.
// Every function returns "" on success or a first-problem message.

// CAs, membership, genesis, and the node wallet under topo.dataDir.
// Idempotent: existing material is kept, so repeated network up does
// not rotate anyone's keys.
std::string provisionMaterial(const TopologyConfig& topo);

// Launches orderers, peers, and the blob service, then waits for every
// node to answer a ping. Partial starts are rolled back: either the
// whole network is up or nothing is left running.
std::string networkUp(const TopologyConfig& topo, const std::string& nodeBinary,
                      std::ostream* log = nullptr);

// SIGTERM to every pidfile, escalating to SIGKILL for stragglers.
std::string networkDown(const TopologyConfig& topo, std::ostream* log = nullptr);

std::optional<Identity> issueIdentity(const TopologyConfig& topo, const std::string& org,
                                      const std::string& subject, Role role, std::string& error);

// Marks the serial revoked in the shared membership file; peers pick it
// up on their next poll.
std::string revokeIdentity(const TopologyConfig& topo, const std::string& org,
                           std::int64_t serial);

// Recomputes every peer's chain linkage and re-runs validation against
// the stored commit codes, then checks the peers agree pairwise on
// their common prefix. Safe against live peers: the block file is
// append-only.
std::string verifyLedgers(const TopologyConfig& topo, std::ostream* log = nullptr);

} // namespace iotbc
