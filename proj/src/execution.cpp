#include "iotbc/execution.hpp"

#include <algorithm>

namespace iotbc {

Json Proposal::toJson() const {
    Json j;
    j["txId"] = txId;
    j["clientCert"] = clientCert.toJson();
    j["contractOp"] = contractOp;
    Json args_ = Json::array();
    for (const auto& a : args) args_.push_back(canon::b64(a));
    j["args"] = std::move(args_);
    j["clientTimestamp"] = canon::formatTimeMs(clientTimestampMs);
    j["clientSignature"] = canon::b64(clientSignature);
    return j;
}

std::optional<Proposal> Proposal::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        Proposal p;
        p.txId = j.at("txId").get<std::string>();
        auto cert = Certificate::fromJson(j.at("clientCert"));
        if (!cert) return std::nullopt;
        p.clientCert = *cert;
        p.contractOp = j.at("contractOp").get<std::string>();
        for (const auto& a : j.at("args")) {
            auto raw = canon::fromB64(a.get<std::string>());
            if (!raw) return std::nullopt;
            p.args.push_back(std::move(*raw));
        }
        auto ts = canon::parseTimeMs(j.at("clientTimestamp").get<std::string>());
        if (!ts) return std::nullopt;
        p.clientTimestampMs = *ts;
        auto sig = canon::fromB64(j.at("clientSignature").get<std::string>());
        if (!sig) return std::nullopt;
        p.clientSignature = std::move(*sig);
        return p;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Bytes Proposal::signingBytes() const {
    Json j = toJson();
    j.erase("clientSignature");
    return canon::dumpBytes(j);
}

Proposal makeProposal(const Identity& client, const std::string& txId, const std::string& op,
                      std::vector<Bytes> args, std::int64_t clientTimestampMs) {
    Proposal p;
    p.txId = txId;
    p.clientCert = client.certificate;
    p.contractOp = op;
    p.args = std::move(args);
    p.clientTimestampMs = clientTimestampMs;
    p.clientSignature = client.sign(p.signingBytes());
    return p;
}

bool verifyProposalSignature(const Proposal& p) {
    return crypto::verify(p.signingBytes(), p.clientSignature, p.clientCert.publicKey);
}

AdmissionOutcome admitProposal(const Proposal& p, const VerifyResult& vr, bool mutating) {
    AdmissionOutcome out;
    if (!verifyProposalSignature(p)) {
        out.errorCode = "bad_signature";
        out.detail = "proposal signature check failed";
        return out;
    }
    if (!vr.ok()) {
        out.errorCode = "cert_invalid";
        out.detail = verifyErrorToString(vr.error);
        return out;
    }
    if (!isContractOp(p.contractOp)) {
        out.errorCode = "unknown_operation";
        out.detail = p.contractOp;
        return out;
    }
    if (mutating) {
        if (isReadOnlyContractOp(p.contractOp)) {
            out.errorCode = "read_only_op";
            out.detail = "read operations go through Evaluate";
            return out;
        }
        if (vr.role == Role::Reader) {
            out.errorCode = "access_denied";
            out.detail = "reader role cannot mutate";
            return out;
        }
    } else if (!isReadOnlyContractOp(p.contractOp)) {
        out.errorCode = "mutating_op";
        out.detail = "writes go through Submit";
        return out;
    }
    out.caller = CallerContext{vr.orgId, vr.role, deriveDeviceId(p.clientCert)};
    return out;
}

std::optional<Bytes> SimulationContext::get(const std::string& key) {
    auto wit = writeIndex_.find(key);
    if (wit != writeIndex_.end()) return writes_[wit->second].value;
    const StateEntry* entry = snapshot_.get(key);
    recordRead(key, entry);
    if (!entry) return std::nullopt;
    return entry->value;
}

void SimulationContext::put(const std::string& key, Bytes value) {
    stageWrite(key, std::move(value));
}

void SimulationContext::del(const std::string& key) { stageWrite(key, std::nullopt); }

std::vector<std::pair<std::string, Bytes>> SimulationContext::scanPrefix(
        const std::string& prefix) {
    // Merge the snapshot scan with the overlay: staged puts shadow or
    // extend, staged deletes hide.
    std::map<std::string, Bytes> merged;
    for (auto& [key, entry] : snapshot_.scanPrefix(prefix)) {
        recordRead(key, &entry);
        merged.emplace(key, entry.value);
    }
    for (const auto& w : writes_) {
        if (w.key.compare(0, prefix.size(), prefix) != 0) continue;
        if (w.value)
            merged[w.key] = *w.value;
        else
            merged.erase(w.key);
    }
    return {merged.begin(), merged.end()};
}

std::vector<ReadEntry> SimulationContext::readSet() const {
    std::vector<ReadEntry> rs;
    rs.reserve(reads_.size());
    for (const auto& [key, version] : reads_) rs.push_back({key, version});
    return rs;
}

std::vector<WriteEntry> SimulationContext::writeSet() const { return writes_; }

void SimulationContext::recordRead(const std::string& key, const StateEntry* entry) {
    reads_.emplace(key, entry ? std::optional<Version>(entry->version) : std::nullopt);
}

void SimulationContext::stageWrite(const std::string& key, std::optional<Bytes> value) {
    auto it = writeIndex_.find(key);
    if (it != writeIndex_.end()) {
        writes_[it->second].value = std::move(value);
        return;
    }
    writeIndex_.emplace(key, writes_.size());
    writes_.push_back({key, std::move(value)});
}

Json EndorseOutcome::toJson() const {
    return Json{{"endorsed", endorsed},
                {"errorCode", errorCode},
                {"resultPayload", canon::b64(resultPayload)},
                {"readSet", readSetToJson(readSet)},
                {"writeSet", writeSetToJson(writeSet)},
                {"endorserCert", endorsement.endorserCert.toJson()},
                {"signature", canon::b64(endorsement.signature)}};
}

std::optional<EndorseOutcome> EndorseOutcome::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    EndorseOutcome o;
    try {
        o.endorsed = j.at("endorsed").get<bool>();
        o.errorCode = j.at("errorCode").get<std::string>();
        auto payload = canon::fromB64(j.at("resultPayload").get<std::string>());
        auto rs = readSetFromJson(j.at("readSet"));
        auto ws = writeSetFromJson(j.at("writeSet"));
        auto cert = Certificate::fromJson(j.at("endorserCert"));
        auto sig = canon::fromB64(j.at("signature").get<std::string>());
        if (!payload || !rs || !ws || !cert || !sig) return std::nullopt;
        o.resultPayload = std::move(*payload);
        o.readSet = std::move(*rs);
        o.writeSet = std::move(*ws);
        o.endorsement.endorserCert = std::move(*cert);
        o.endorsement.signature = std::move(*sig);
    } catch (const Json::exception&) {
        return std::nullopt;
    }
    return o;
}

EndorseOutcome simulateProposal(const WorldState& state, const Identity& endorser,
                                const Proposal& proposal, const CallerContext& caller) {
    SimulationContext ctx(state);
    std::vector<std::string> args;
    args.reserve(proposal.args.size());
    for (const auto& a : proposal.args) args.push_back(canon::bytesToString(a));
    ContractResult result =
            runContract(ctx, caller, proposal.contractOp, args, proposal.clientTimestampMs);

    EndorseOutcome out;
    out.resultPayload = result.payloadBytes();
    if (!result.ok) {
        out.errorCode = result.errorCode;
        return out;
    }
    out.endorsed = true;
    out.readSet = ctx.readSet();
    out.writeSet = ctx.writeSet();

    Transaction shape;
    shape.txId = proposal.txId;
    shape.readSet = out.readSet;
    shape.writeSet = out.writeSet;
    shape.resultPayload = out.resultPayload;
    out.endorsement.endorserCert = endorser.certificate;
    out.endorsement.signature = endorser.sign(shape.endorsedBytes());
    return out;
}

AssembleResult assembleTransaction(const Proposal& proposal,
                                   const std::vector<EndorseOutcome>& outcomes) {
    if (outcomes.empty()) return {std::nullopt, "NoResponses"};

    Transaction tx;
    tx.txId = proposal.txId;
    tx.creatorCert = proposal.clientCert;
    tx.contractOp = proposal.contractOp;
    tx.args = proposal.args;
    tx.clientTimestampMs = proposal.clientTimestampMs;
    tx.readSet = outcomes.front().readSet;
    tx.writeSet = outcomes.front().writeSet;
    tx.resultPayload = outcomes.front().resultPayload;

    Bytes expected = tx.endorsedBytes();
    for (const auto& o : outcomes) {
        if (!o.endorsed) return {std::nullopt, "EndorsementMismatch"};
        Transaction probe;
        probe.txId = proposal.txId;
        probe.readSet = o.readSet;
        probe.writeSet = o.writeSet;
        probe.resultPayload = o.resultPayload;
        if (probe.endorsedBytes() != expected) return {std::nullopt, "EndorsementMismatch"};
        tx.endorsements.push_back(o.endorsement);
    }
    return {std::move(tx), ""};
}

Validator::Validator(MembershipDirectory dir, EndorsementPolicy policy)
    : dir_(std::move(dir)), policy_(std::move(policy)) {}

bool Validator::endorserCertValid(const Certificate& cert, std::int64_t atMs) {
    // Window first (cheap), then the cached root-signature check.
    if (atMs < cert.notBeforeMs || atMs > cert.notAfterMs) return false;
    if (cert.issuerOrgId != cert.orgId) return false;
    auto rootIt = dir_.rootCerts.find(cert.issuerOrgId);
    if (rootIt == dir_.rootCerts.end()) return false;
    std::string key = crypto::sha256Hex(cert.canonicalBytes());
    auto it = certOk_.find(key);
    if (it != certOk_.end()) return it->second;
    bool ok = crypto::verify(cert.signingBytes(), cert.issuerSignature, rootIt->second);
    certOk_.emplace(std::move(key), ok);
    return ok;
}

std::vector<ValidationCode> Validator::validateBlock(WorldState& state, const Block& block) {
    std::vector<ValidationCode> codes;
    codes.reserve(block.transactions.size());
    std::unordered_set<std::string> seenInBlock;

    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        const Transaction& tx = block.transactions[i];
        ValidationCode code = ValidationCode::VALID;

        Bytes endorsed = tx.endorsedBytes();
        for (const auto& e : tx.endorsements) {
            if (!endorserCertValid(e.endorserCert, tx.clientTimestampMs) ||
                !crypto::verify(endorsed, e.signature, e.endorserCert.publicKey)) {
                code = ValidationCode::BAD_SIGNATURE;
                break;
            }
        }

        if (code == ValidationCode::VALID) {
            std::set<std::string> orgs;
            for (const auto& e : tx.endorsements)
                if (policy_.orgSet.count(e.endorserCert.orgId))
                    orgs.insert(e.endorserCert.orgId);
            if (orgs.size() < policy_.required())
                code = ValidationCode::ENDORSEMENT_POLICY_FAILURE;
        }

        if (code == ValidationCode::VALID) {
            if (committedTxIds_.count(tx.txId) || seenInBlock.count(tx.txId))
                code = ValidationCode::DUPLICATE_TXID;
        }

        if (code == ValidationCode::VALID) {
            for (const auto& r : tx.readSet) {
                const StateEntry* entry = state.get(r.key);
                std::optional<Version> current =
                        entry ? std::optional<Version>(entry->version) : std::nullopt;
                if (current != r.version) {
                    code = ValidationCode::MVCC_CONFLICT;
                    break;
                }
            }
        }

        if (code == ValidationCode::VALID) {
            state.applyWriteSet(tx.writeSet,
                                Version{block.number, static_cast<std::int64_t>(i)});
            committedTxIds_.insert(tx.txId);
        }
        seenInBlock.insert(tx.txId);
        codes.push_back(code);
    }
    return codes;
}

ReplayResult replayChain(const BlockStore& store, const MembershipDirectory& dir,
                         const EndorsementPolicy& policy) {
    ReplayResult out;
    Validator validator(dir, policy);
    out.codesMatchStored = true;
    for (const Block& b : store.blocks()) {
        auto codes = validator.validateBlock(out.state, b);
        if (codes != b.commitMetadata) out.codesMatchStored = false;
        out.codes.push_back(std::move(codes));
    }
    return out;
}

} // namespace iotbc
