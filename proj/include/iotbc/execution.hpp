#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "iotbc/contracts.hpp"
#include "iotbc/identity.hpp"
#include "iotbc/ledger.hpp"

namespace iotbc {

struct Proposal {
    std::string txId;
    Certificate clientCert;
    std::string contractOp;
    std::vector<Bytes> args;
    std::int64_t clientTimestampMs = 0;
    Bytes clientSignature;

    Json toJson() const;
    static std::optional<Proposal> fromJson(const Json& j);
    Bytes signingBytes() const;  // canonical encoding minus the signature
};

Proposal makeProposal(const Identity& client, const std::string& txId, const std::string& op,
                      std::vector<Bytes> args, std::int64_t clientTimestampMs);

bool verifyProposalSignature(const Proposal& p);

// The gate every proposal passes before simulation. Precedence is fixed:
// signature, then membership, then operation existence, then the
// read/write split against the caller's role. vr is the caller's
// membership check (done outside so serving nodes can cache it).
struct AdmissionOutcome {
    std::string errorCode;  // "" = admitted
    std::string detail;
    CallerContext caller;   // meaningful only when admitted

    bool admitted() const { return errorCode.empty(); }
};

AdmissionOutcome admitProposal(const Proposal& p, const VerifyResult& vr, bool mutating);

struct EndorsementPolicy {
    std::set<std::string> orgSet;

    // MAJORITY: strictly more than half of the orgs, distinct orgs
    // counted once.
    std::size_t required() const { return orgSet.size() / 2 + 1; }
};

// Records reads and writes of one simulation over an immutable snapshot.
// Reads of the simulation's own pending writes come from the overlay and
// add no read-set entry; each snapshot key is recorded at most once.
class SimulationContext final : public StateView {
public:
    explicit SimulationContext(const WorldState& snapshot) : snapshot_(snapshot) {}

    std::optional<Bytes> get(const std::string& key) override;
    void put(const std::string& key, Bytes value) override;
    void del(const std::string& key) override;
    std::vector<std::pair<std::string, Bytes>> scanPrefix(const std::string& prefix) override;

    std::vector<ReadEntry> readSet() const;
    std::vector<WriteEntry> writeSet() const;

private:
    const WorldState& snapshot_;
    std::map<std::string, std::optional<Version>> reads_;  // key -> seen version
    std::vector<WriteEntry> writes_;                       // ordered, keys unique
    std::unordered_map<std::string, std::size_t> writeIndex_;

    void recordRead(const std::string& key, const StateEntry* entry);
    void stageWrite(const std::string& key, std::optional<Bytes> value);
};

struct EndorseOutcome {
    bool endorsed = false;
    std::string errorCode;  // contract error code when not endorsed
    Bytes resultPayload;    // contract payload, success or error
    std::vector<ReadEntry> readSet;
    std::vector<WriteEntry> writeSet;
    Endorsement endorsement;

    Json toJson() const;
    static std::optional<EndorseOutcome> fromJson(const Json& j);
};

// Pre: the proposal is already authenticated (signature checked, client
// certificate verified, caller context resolved).
EndorseOutcome simulateProposal(const WorldState& state, const Identity& endorser,
                                const Proposal& proposal, const CallerContext& caller);

struct AssembleResult {
    std::optional<Transaction> tx;
    std::string error;  // "NoResponses" or "EndorsementMismatch"
};

AssembleResult assembleTransaction(const Proposal& proposal,
                                   const std::vector<EndorseOutcome>& outcomes);

// Commit-time validation. Deterministic in (chain prefix, block): root
// certs and the policy are fixed at construction, and revocation lists
// are deliberately not consulted here — peers reload CRLs at different
// moments, and admission control already checked them.
class Validator {
public:
    Validator(MembershipDirectory dir, EndorsementPolicy policy);

    // Codes in transaction order; VALID write sets applied to state at
    // (block.number, txIndex).
    std::vector<ValidationCode> validateBlock(WorldState& state, const Block& block);

private:
    MembershipDirectory dir_;
    EndorsementPolicy policy_;
    std::unordered_set<std::string> committedTxIds_;
    std::unordered_map<std::string, bool> certOk_;  // cert content hash -> root sig ok

    bool endorserCertValid(const Certificate& cert, std::int64_t atMs);
};

struct ReplayResult {
    WorldState state;
    std::vector<std::vector<ValidationCode>> codes;  // per block
    bool codesMatchStored = false;
};

// Rebuilds world state from genesis by re-running validation; the
// recovery path and the determinism oracle.
ReplayResult replayChain(const BlockStore& store, const MembershipDirectory& dir,
                         const EndorsementPolicy& policy);

} // namespace iotbc
