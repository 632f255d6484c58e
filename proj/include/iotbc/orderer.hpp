#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "iotbc/ledger.hpp"
#include "iotbc/net.hpp"
#include "iotbc/ordering.hpp"
#include "iotbc/raft.hpp"
#include "iotbc/topology.hpp"

namespace iotbc {

// One ordering-service node: raft replication of cut batches, block
// assembly, broadcast intake, and block delivery streams. Blocks are a
// pure function of the committed raft log, so the block log lives in
// memory and rebuilds from raft persistence on restart.
class OrdererNode {
public:
    struct Options {
        TopologyConfig topo;
        int index = 0;
        Block genesis;
        std::string storageDir;
        std::int64_t electionMinMs = 300;
        std::int64_t electionMaxMs = 600;
        std::int64_t heartbeatMs = 75;
    };

    explicit OrdererNode(Options opt);
    ~OrdererNode();

    bool start();
    void stop();

    std::int64_t chainHeight() const;
    bool isLeader() const;

private:
    Options opt_;
    net::Server server_;

    mutable std::mutex raftMu_;
    std::unique_ptr<raft::FileStorage> storage_;
    std::unique_ptr<raft::Node> raft_;
    BatchCutter cutter_;
    bool leading_ = false;

    mutable std::mutex chainMu_;
    std::condition_variable chainCv_;
    std::vector<Block> chain_;  // chain_[n] is block n; [0] is genesis

    std::mutex linksMu_;
    std::map<int, std::shared_ptr<net::MuxClient>> links_;  // orderer index -> link

    std::thread tickThread_;
    std::atomic<bool> running_{false};

    void handle(std::shared_ptr<net::Conn> conn, net::Envelope e);
    void handleBroadcast(std::shared_ptr<net::Conn> conn, const net::Envelope& e);
    void handleDeliver(std::shared_ptr<net::Conn> conn, const net::Envelope& e);
    void handleStats(std::shared_ptr<net::Conn> conn, const net::Envelope& e);

    // Must hold raftMu_. Applies committed entries and leadership moves,
    // returns messages for the caller to send after unlocking.
    std::vector<raft::Message> processEffects(raft::Effects fx);
    void appendBlock(const raft::LogEntry& entry);
    void sendMessages(std::vector<raft::Message> msgs);
    void tickLoop();
};

} // namespace iotbc
