#include "iotbc/orderer.hpp"

#include <filesystem>
#include <random>

#include "iotbc/procstats.hpp"

namespace iotbc {

namespace {

// "orderer-3" -> 3
std::optional<int> ordererIndex(const std::string& id) {
    auto dash = id.rfind('-');
    if (dash == std::string::npos) return std::nullopt;
    try {
        return std::stoi(id.substr(dash + 1));
    } catch (...) {
        return std::nullopt;
    }
}

} // namespace

OrdererNode::OrdererNode(Options opt) : opt_(std::move(opt)), cutter_(opt_.topo.ordering.batch) {}

OrdererNode::~OrdererNode() { stop(); }

bool OrdererNode::start() {
    std::filesystem::create_directories(opt_.storageDir);
    storage_ = std::make_unique<raft::FileStorage>(opt_.storageDir);

    std::vector<std::string> ids;
    for (int i = 0; i < opt_.topo.ordering.nodes; ++i)
        ids.push_back(TopologyConfig::ordererName(i));
    std::uint64_t seed = std::random_device{}();
    raft_ = std::make_unique<raft::Node>(TopologyConfig::ordererName(opt_.index), ids, *storage_,
                                         seed, opt_.electionMinMs, opt_.electionMaxMs,
                                         opt_.heartbeatMs);
    {
        std::lock_guard lock(chainMu_);
        chain_.clear();
        chain_.push_back(opt_.genesis);
    }
    running_.store(true);
    if (!server_.start(opt_.topo.ordererPort(opt_.index),
                       [this](std::shared_ptr<net::Conn> c, net::Envelope e) {
                           handle(std::move(c), std::move(e));
                       }))
        return false;
    tickThread_ = std::thread([this] { tickLoop(); });
    return true;
}

void OrdererNode::stop() {
    if (!running_.exchange(false)) return;
    chainCv_.notify_all();
    if (tickThread_.joinable()) tickThread_.join();
    server_.stop();
    std::lock_guard lock(linksMu_);
    links_.clear();
}

std::int64_t OrdererNode::chainHeight() const {
    std::lock_guard lock(chainMu_);
    return static_cast<std::int64_t>(chain_.size());
}

bool OrdererNode::isLeader() const {
    std::lock_guard lock(raftMu_);
    return raft_->isLeader();
}

void OrdererNode::tickLoop() {
    while (running_.load()) {
        std::vector<raft::Message> out;
        {
            std::lock_guard lock(raftMu_);
            auto now = canon::nowMs();
            out = processEffects(raft_->tick(now));
            if (raft_->isLeader()) {
                if (auto batch = cutter_.onTimeout(now)) {
                    Json txs = Json::array();
                    for (const auto& tx : *batch) txs.push_back(canon::b64(tx));
                    auto r = raft_->submit(canon::dumpBytes(Json{{"txs", txs}}), now);
                    auto more = processEffects(std::move(r.effects));
                    out.insert(out.end(), more.begin(), more.end());
                }
            }
        }
        sendMessages(std::move(out));
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
}

std::vector<raft::Message> OrdererNode::processEffects(raft::Effects fx) {
    for (const auto& c : fx.committed)
        if (!c.entry.noop) appendBlock(c.entry);
    if (fx.becameLeader) {
        leading_ = true;
        // A fresh leader starts with an empty batch; whatever the old
        // leader had pending is the clients' to resubmit.
        cutter_ = BatchCutter(opt_.topo.ordering.batch);
    }
    if (fx.steppedDown) leading_ = false;
    return std::move(fx.outbound);
}

void OrdererNode::appendBlock(const raft::LogEntry& entry) {
    auto j = canon::parse(entry.payload);
    if (!j || !j->contains("txs")) return;
    std::vector<Transaction> txs;
    for (const auto& item : (*j)["txs"]) {
        auto raw = canon::fromB64(item.get<std::string>());
        if (!raw) continue;
        auto parsed = canon::parse(*raw);
        if (!parsed) continue;
        auto tx = Transaction::fromJson(*parsed);
        if (tx) txs.push_back(std::move(*tx));
    }
    std::lock_guard lock(chainMu_);
    Block b;
    b.number = static_cast<std::int64_t>(chain_.size());
    b.prevHash = computeBlockHash(chain_.back());
    b.transactions = std::move(txs);
    b.dataHash = Block::computeDataHash(b.transactions);
    chain_.push_back(std::move(b));
    chainCv_.notify_all();
}

void OrdererNode::sendMessages(std::vector<raft::Message> msgs) {
    for (auto& m : msgs) {
        auto idx = ordererIndex(m.to);
        if (!idx) continue;
        std::shared_ptr<net::MuxClient> link;
        {
            std::lock_guard lock(linksMu_);
            auto it = links_.find(*idx);
            if (it != links_.end() && it->second->alive()) link = it->second;
        }
        if (!link) {
            link = net::MuxClient::dial("127.0.0.1", opt_.topo.ordererPort(*idx));
            if (!link) continue;  // peer down; raft retries by design
            std::lock_guard lock(linksMu_);
            links_[*idx] = link;
        }
        net::Envelope e;
        e.type = "Raft";
        e.payload = Json{{"message", m.toJson()}};
        link->send(std::move(e));
    }
}

void OrdererNode::handle(std::shared_ptr<net::Conn> conn, net::Envelope e) {
    if (e.type == "Ping") {
        conn->send(net::makeAck(e.ref, Json{{"node", TopologyConfig::ordererName(opt_.index)}}));
    } else if (e.type == "Raft") {
        auto m = raft::Message::fromJson(e.payload.value("message", Json()));
        if (!m) return;
        std::vector<raft::Message> out;
        {
            std::lock_guard lock(raftMu_);
            out = processEffects(raft_->handle(*m, canon::nowMs()));
        }
        sendMessages(std::move(out));
    } else if (e.type == "Broadcast") {
        handleBroadcast(std::move(conn), e);
    } else if (e.type == "Deliver") {
        handleDeliver(std::move(conn), e);
    } else if (e.type == "Stats") {
        handleStats(std::move(conn), e);
    } else {
        conn->send(net::makeError(e.ref, "bad_type", "unknown message type: " + e.type));
    }
}

void OrdererNode::handleBroadcast(std::shared_ptr<net::Conn> conn, const net::Envelope& e) {
    auto raw = canon::fromB64(e.payload.value("tx", ""));
    if (!raw || raw->empty()) {
        conn->send(net::makeError(e.ref, "bad_request", "missing tx bytes"));
        return;
    }
    // Reject what no block could carry before it reaches the cutter.
    auto parsed = canon::parse(*raw);
    if (!parsed || !Transaction::fromJson(*parsed)) {
        conn->send(net::makeError(e.ref, "bad_request", "tx does not parse"));
        return;
    }
    std::vector<raft::Message> out;
    {
        std::lock_guard lock(raftMu_);
        if (!raft_->isLeader()) {
            conn->send(net::makeError(e.ref, "not_leader", "this node is not the leader",
                                      Json{{"hint", raft_->leaderHint()}}));
            return;
        }
        auto now = canon::nowMs();
        auto result = cutter_.enqueue(*raw, now);
        if (result.rejected) {
            conn->send(net::makeError(e.ref, "too_large", "transaction exceeds the hard cap"));
            return;
        }
        for (auto& batch : result.cuts) {
            Json txs = Json::array();
            for (const auto& tx : batch) txs.push_back(canon::b64(tx));
            auto r = raft_->submit(canon::dumpBytes(Json{{"txs", txs}}), now);
            auto more = processEffects(std::move(r.effects));
            out.insert(out.end(), more.begin(), more.end());
        }
    }
    sendMessages(std::move(out));
    // Accepted for ordering; commit is the peers' business.
    conn->send(net::makeAck(e.ref));
}

void OrdererNode::handleDeliver(std::shared_ptr<net::Conn> conn, const net::Envelope& e) {
    auto next = std::max<std::int64_t>(0, e.payload.value("from", std::int64_t{0}));
    conn->send(net::makeAck(e.ref));
    // This connection is now a one-way block stream; its read thread
    // lives here until the subscriber hangs up or we stop.
    while (running_.load()) {
        Block block;
        {
            std::unique_lock lock(chainMu_);
            chainCv_.wait(lock, [&] {
                return !running_.load() || next < static_cast<std::int64_t>(chain_.size());
            });
            if (!running_.load()) return;
            block = chain_[static_cast<std::size_t>(next)];
        }
        net::Envelope push;
        push.type = "Block";
        push.ref = e.ref;
        push.payload = Json{{"block", block.toJson()}};
        if (!conn->send(push)) return;
        ++next;
    }
}

void OrdererNode::handleStats(std::shared_ptr<net::Conn> conn, const net::Envelope& e) {
    auto ps = readProcStats();
    bool leader;
    {
        std::lock_guard lock(raftMu_);
        leader = raft_->isLeader();
    }
    conn->send(net::makeAck(
        e.ref, Json{{"cpuTicks", ps.cpuTicks},
                    {"ticksPerSecond", ps.ticksPerSecond},
                    {"memBytes", ps.memBytes},
                    {"diskReadBytes", ps.diskReadBytes},
                    {"diskWriteBytes", ps.diskWriteBytes},
                    {"netInBytes", net::bytesIn()},
                    {"netOutBytes", net::bytesOut()},
                    {"height", chainHeight()},
                    {"leader", leader},
                    {"timeMs", canon::nowMs()}}));
}

} // namespace iotbc
