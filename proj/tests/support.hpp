#pragma once

// Shared fixture: a two-org consortium with one endorsing peer per org,
// wired through the real simulate/assemble/validate pipeline but with no
// network in between.

#include <string>
#include <vector>

#include "iotbc/execution.hpp"

namespace iotbc::testsupport {

inline CallerContext makeCaller(const Certificate& cert) {
    return {cert.orgId, cert.role, deriveDeviceId(cert)};
}

struct Consortium {
    CertificateAuthority ca1;
    CertificateAuthority ca2;
    MembershipDirectory dir;
    EndorsementPolicy policy;
    Identity peer1, peer2;
    Identity dev1, dev2, app1, reader1;
    WorldState state;
    BlockStore store;
    Validator validator;
    std::int64_t clock = 1755648000000;  // advanced per tx for distinct timestamps
    std::int64_t txCounter = 0;

    static constexpr std::int64_t kNotBefore = 1700000000000;
    static constexpr std::int64_t kNotAfter = 4102444800000;

    Consortium()
        : ca1(CertificateAuthority::create("org1", kNotBefore, kNotAfter)),
          ca2(CertificateAuthority::create("org2", kNotBefore, kNotAfter)),
          validator(MembershipDirectory{}, EndorsementPolicy{}) {
        crypto::init();
        dir.rootCerts["org1"] = ca1.root().certificate.publicKey;
        dir.rootCerts["org2"] = ca2.root().certificate.publicKey;
        policy.orgSet = {"org1", "org2"};
        peer1 = ca1.issue("peer1", Role::Admin, kNotBefore, kNotAfter);
        peer2 = ca2.issue("peer2", Role::Admin, kNotBefore, kNotAfter);
        dev1 = ca1.issue("dev1", Role::Writer, kNotBefore, kNotAfter);
        dev2 = ca2.issue("dev2", Role::Writer, kNotBefore, kNotAfter);
        app1 = ca1.issue("app1", Role::Writer, kNotBefore, kNotAfter);
        reader1 = ca1.issue("reader1", Role::Reader, kNotBefore, kNotAfter);
        validator = Validator(dir, policy);
        store.append(Block::makeGenesis());
    }

    std::string freshTxId() { return "tx-" + std::to_string(++txCounter); }

    Proposal propose(const Identity& client, const std::string& op,
                     const std::vector<std::string>& args) {
        std::vector<Bytes> raw;
        for (const auto& a : args) raw.push_back(canon::stringToBytes(a));
        return makeProposal(client, freshTxId(), op, std::move(raw), clock++);
    }

    // Read path: local simulation on one peer, nothing ordered.
    ContractResult evaluate(const Identity& client, const std::string& op,
                            const std::vector<std::string>& args) {
        SimulationContext ctx(state);
        return runContract(ctx, makeCaller(client.certificate), op, args, clock++);
    }

    EndorseOutcome endorse(const Identity& endorser, const Proposal& p) {
        return simulateProposal(state, endorser, p, makeCaller(p.clientCert));
    }

    // Write path: endorse on both orgs' peers, assemble, cut a singleton
    // block, validate and commit.
    struct SubmitResult {
        ValidationCode code;
        std::string endorseError;  // contract error short-circuiting before ordering
        Bytes payload;
    };

    SubmitResult submit(const Identity& client, const std::string& op,
                        const std::vector<std::string>& args) {
        Proposal p = propose(client, op, args);
        auto o1 = endorse(peer1, p);
        auto o2 = endorse(peer2, p);
        if (!o1.endorsed) return {ValidationCode::VALID, o1.errorCode, o1.resultPayload};
        auto assembled = assembleTransaction(p, {o1, o2});
        if (!assembled.tx) return {ValidationCode::VALID, assembled.error, {}};
        return {commit({*assembled.tx}).front(), "", o1.resultPayload};
    }

    std::vector<ValidationCode> commit(std::vector<Transaction> txs) {
        Block b;
        b.number = store.height();
        b.prevHash = store.headHash();
        b.dataHash = Block::computeDataHash(txs);
        b.transactions = std::move(txs);
        b.commitMetadata = validator.validateBlock(state, b);
        auto codes = b.commitMetadata;
        store.append(std::move(b));
        return codes;
    }

    Transaction endorsedTx(const Identity& client, const std::string& op,
                           const std::vector<std::string>& args) {
        Proposal p = propose(client, op, args);
        auto o1 = endorse(peer1, p);
        auto o2 = endorse(peer2, p);
        REQUIRE(o1.endorsed);
        REQUIRE(o2.endorsed);
        auto assembled = assembleTransaction(p, {o1, o2});
        REQUIRE(assembled.tx.has_value());
        return *assembled.tx;
    }
};

} // namespace iotbc::testsupport
