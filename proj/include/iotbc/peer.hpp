#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "iotbc/execution.hpp"
#include "iotbc/net.hpp"
#include "iotbc/topology.hpp"

namespace iotbc {

// One event per committed transaction, in (block, tx) order. The broker
// hints are populated only for VALID transactions, so filtered
// subscribers never hear about invalidated requests or responses.
struct CommitEvent {
    std::int64_t blockNumber = 0;
    std::int64_t txIndex = 0;
    std::string txId;
    ValidationCode code = ValidationCode::VALID;
    std::string contractOp;
    std::string targetOrgId;      // request notification: service owner
    std::string targetDeviceId;
    std::string requesterId;      // response notification: original requester
    std::string requestId;

    Json toJson() const;
    static std::optional<CommitEvent> fromJson(const Json& j);
};

// A peer process: committed chain and state, commit-time validation, and
// the embedded gateway (evaluate, submit, subscribe) plus the endorsement
// endpoint other peers' gateways call.
class PeerNode {
public:
    struct Options {
        TopologyConfig topo;
        std::string org;
        int index = 0;
        Identity identity;
        Block genesis;
        std::int64_t defaultSubmitTimeoutMs = 30000;
    };

    explicit PeerNode(Options opt);
    ~PeerNode();

    bool start();
    void stop();

    std::int64_t height() const;
    std::string stateHash() const;
    std::int64_t orderingBroadcasts() const { return orderingBroadcasts_.load(); }

private:
    Options opt_;
    std::size_t orgIdx_ = 0;
    EndorsementPolicy policy_;
    std::string blocksPath_;

    std::shared_mutex memberMu_;
    MembershipDirectory members_;
    std::int64_t memberStamp_ = 0;
    VerifyCache certCache_;

    mutable std::mutex stateMu_;
    WorldState state_;
    BlockStore store_;
    std::unique_ptr<Validator> validator_;

    net::Server server_;

    std::mutex watchMu_;
    struct Watch {
        std::weak_ptr<net::Conn> conn;
        std::int64_t ref = 0;
        std::int64_t deadlineMs = 0;
    };
    std::unordered_map<std::string, std::vector<Watch>> watches_;

    // Append-only commit event log; each subscription walks it at its own
    // pace, so a slow subscriber lags without ever blocking commits.
    std::mutex eventMu_;
    std::condition_variable eventCv_;
    std::vector<CommitEvent> events_;

    struct Subscription {
        std::shared_ptr<net::Conn> conn;
        std::int64_t ref = 0;
        bool filterDevice = false;
        std::string orgId, deviceId;
        bool filterRequester = false;
        std::string requesterId;
        std::size_t next = 0;
        std::thread sender;
    };
    std::mutex subMu_;
    std::vector<std::unique_ptr<Subscription>> subs_;

    std::thread deliverThread_;
    std::mutex deliverMu_;
    std::shared_ptr<net::Conn> deliverConn_;

    std::mutex linkMu_;
    std::map<std::string, std::shared_ptr<net::MuxClient>> endorseLinks_;  // host:port key
    std::map<std::string, unsigned> endorseRr_;  // org -> rotation

    std::mutex ordMu_;
    std::shared_ptr<net::MuxClient> ordLink_;
    int ordIdx_ = 0;

    std::atomic<std::int64_t> orderingBroadcasts_{0};
    std::thread janitor_;
    std::atomic<bool> running_{false};

    void handle(std::shared_ptr<net::Conn> conn, net::Envelope e);
    void onDisconnect(const std::shared_ptr<net::Conn>& conn);
    void handleEvaluate(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e);
    void handleEndorse(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e);
    void handleSubmit(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e);
    void handleSubscribe(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e);
    void handleStats(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e);

    struct Admission {
        Proposal proposal;
        CallerContext caller;
    };
    // Replies with the failure itself when admission fails.
    std::optional<Admission> admit(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e,
                                   bool mutating);

    std::optional<EndorseOutcome> endorseRemote(const std::string& org, const Json& proposalJson,
                                                std::string& firstError);
    bool broadcastTx(const Bytes& txBytes, std::string& error);

    void deliverLoop();
    bool commitBlock(Block block);
    void fireWatches(const Block& block);
    void appendEvents(const Block& block);
    void subscriptionLoop(Subscription* sub);
    static bool eventMatches(const Subscription& s, const CommitEvent& ev);

    void janitorLoop();
    void reloadMembership();
};

} // namespace iotbc
