#include "iotbc/peer.hpp"

#include <filesystem>

#include "iotbc/contracts.hpp"
#include "iotbc/procstats.hpp"

namespace iotbc {

Json CommitEvent::toJson() const {
    Json j{{"blockNumber", blockNumber},
           {"txIndex", txIndex},
           {"txId", txId},
           {"validationCode", validationCodeToString(code)},
           {"contractOp", contractOp}};
    if (!targetOrgId.empty()) {
        j["targetOrgId"] = targetOrgId;
        j["targetDeviceId"] = targetDeviceId;
    }
    if (!requesterId.empty()) j["requesterId"] = requesterId;
    if (!requestId.empty()) j["requestId"] = requestId;
    return j;
}

std::optional<CommitEvent> CommitEvent::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    CommitEvent ev;
    try {
        ev.blockNumber = j.at("blockNumber").get<std::int64_t>();
        ev.txIndex = j.at("txIndex").get<std::int64_t>();
        ev.txId = j.at("txId").get<std::string>();
        auto code = validationCodeFromString(j.at("validationCode").get<std::string>());
        if (!code) return std::nullopt;
        ev.code = *code;
        ev.contractOp = j.at("contractOp").get<std::string>();
        ev.targetOrgId = j.value("targetOrgId", "");
        ev.targetDeviceId = j.value("targetDeviceId", "");
        ev.requesterId = j.value("requesterId", "");
        ev.requestId = j.value("requestId", "");
    } catch (const Json::exception&) {
        return std::nullopt;
    }
    return ev;
}

PeerNode::PeerNode(Options opt) : opt_(std::move(opt)) {
    for (std::size_t i = 0; i < opt_.topo.orgs.size(); ++i)
        if (opt_.topo.orgs[i].name == opt_.org) orgIdx_ = i;
    policy_.orgSet = opt_.topo.policyOrgs;
    blocksPath_ = opt_.topo.peerDir(opt_.org, opt_.index) + "/blocks.bin";
}

PeerNode::~PeerNode() { stop(); }

bool PeerNode::start() {
    std::filesystem::create_directories(opt_.topo.peerDir(opt_.org, opt_.index));
    reloadMembership();
    {
        std::shared_lock lock(memberMu_);
        if (members_.rootCerts.empty()) return false;
        validator_ = std::make_unique<Validator>(members_, policy_);
    }

    auto opened = BlockStore::open(blocksPath_);
    if (!opened) return false;
    store_ = std::move(*opened);
    if (store_.height() == 0) {
        if (store_.append(opt_.genesis) != AppendError::Ok) return false;
    }
    // Rebuild state by re-validating the stored chain; stored codes must
    // match or the store is not ours.
    for (const auto& block : store_.blocks()) {
        auto codes = validator_->validateBlock(state_, block);
        if (codes != block.commitMetadata) return false;
    }
    // Rebuild the commit-event log too, so subscription cursors survive a
    // restart.
    for (const auto& block : store_.blocks()) appendEvents(block);

    running_.store(true);
    if (!server_.start(
            opt_.topo.peerPort(orgIdx_, opt_.index),
            [this](std::shared_ptr<net::Conn> c, net::Envelope e) { handle(std::move(c), std::move(e)); },
            [this](std::shared_ptr<net::Conn> c) { onDisconnect(c); }))
        return false;
    deliverThread_ = std::thread([this] { deliverLoop(); });
    janitor_ = std::thread([this] { janitorLoop(); });
    return true;
}

void PeerNode::stop() {
    if (!running_.exchange(false)) return;
    {
        std::lock_guard lock(deliverMu_);
        if (deliverConn_) deliverConn_->shutdown();
    }
    eventCv_.notify_all();
    if (deliverThread_.joinable()) deliverThread_.join();
    if (janitor_.joinable()) janitor_.join();
    std::vector<std::unique_ptr<Subscription>> subs;
    {
        std::lock_guard lock(subMu_);
        subs.swap(subs_);
    }
    for (auto& s : subs)
        if (s->sender.joinable()) s->sender.join();
    server_.stop();
    std::lock_guard lock(linkMu_);
    endorseLinks_.clear();
}

std::int64_t PeerNode::height() const {
    std::lock_guard lock(stateMu_);
    return store_.height();
}

std::string PeerNode::stateHash() const {
    std::lock_guard lock(stateMu_);
    return state_.contentHash();
}

void PeerNode::reloadMembership() {
    std::error_code ec;
    auto stamp = std::filesystem::last_write_time(opt_.topo.membershipPath(), ec);
    if (ec) return;
    auto stampMs = std::chrono::duration_cast<std::chrono::milliseconds>(
                       stamp.time_since_epoch())
                       .count();
    {
        std::shared_lock lock(memberMu_);
        if (stampMs == memberStamp_ && !members_.rootCerts.empty()) return;
    }
    auto j = loadJsonFile(opt_.topo.membershipPath());
    if (!j) return;
    auto dir = MembershipDirectory::fromJson(*j);
    if (!dir) return;
    std::unique_lock lock(memberMu_);
    members_ = std::move(*dir);
    memberStamp_ = stampMs;
}

void PeerNode::janitorLoop() {
    int beat = 0;
    while (running_.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        // Expire submit watchers past their deadline.
        auto now = canon::nowMs();
        std::vector<std::pair<std::shared_ptr<net::Conn>, std::int64_t>> expired;
        {
            std::lock_guard lock(watchMu_);
            for (auto it = watches_.begin(); it != watches_.end();) {
                auto& list = it->second;
                for (auto w = list.begin(); w != list.end();) {
                    if (w->deadlineMs <= now) {
                        if (auto conn = w->conn.lock()) expired.emplace_back(conn, w->ref);
                        w = list.erase(w);
                    } else {
                        ++w;
                    }
                }
                it = list.empty() ? watches_.erase(it) : std::next(it);
            }
        }
        for (auto& [conn, ref] : expired)
            conn->send(net::makeError(ref, "timeout", "commit not observed in time"));
        if (++beat % 5 == 0) reloadMembership();
    }
}

void PeerNode::handle(std::shared_ptr<net::Conn> conn, net::Envelope e) {
    if (e.type == "Ping") {
        conn->send(net::makeAck(e.ref, Json{{"node", TopologyConfig::peerName(opt_.org, opt_.index)}}));
    } else if (e.type == "Evaluate") {
        handleEvaluate(conn, e);
    } else if (e.type == "Endorse") {
        handleEndorse(conn, e);
    } else if (e.type == "Submit") {
        handleSubmit(conn, e);
    } else if (e.type == "Subscribe") {
        handleSubscribe(conn, e);
    } else if (e.type == "Stats") {
        handleStats(conn, e);
    } else {
        conn->send(net::makeError(e.ref, "bad_type", "unknown message type: " + e.type));
    }
}

void PeerNode::onDisconnect(const std::shared_ptr<net::Conn>& conn) {
    // Reap this connection's subscriptions so their threads can be joined
    // promptly rather than at shutdown.
    std::vector<std::unique_ptr<Subscription>> dead;
    {
        std::lock_guard lock(subMu_);
        for (auto it = subs_.begin(); it != subs_.end();) {
            if ((*it)->conn == conn) {
                dead.push_back(std::move(*it));
                it = subs_.erase(it);
            } else {
                ++it;
            }
        }
    }
    eventCv_.notify_all();
    for (auto& s : dead)
        if (s->sender.joinable()) s->sender.join();
}

std::optional<PeerNode::Admission> PeerNode::admit(const std::shared_ptr<net::Conn>& conn,
                                                   const net::Envelope& e, bool mutating) {
    auto p = Proposal::fromJson(e.payload.value("proposal", Json()));
    if (!p) {
        conn->send(net::makeError(e.ref, "bad_request", "proposal does not parse"));
        return std::nullopt;
    }
    VerifyResult vr;
    {
        std::shared_lock lock(memberMu_);
        vr = certCache_.verify(members_, p->clientCert, canon::nowMs());
    }
    auto outcome = admitProposal(*p, vr, mutating);
    if (!outcome.admitted()) {
        conn->send(net::makeError(e.ref, outcome.errorCode, outcome.detail));
        return std::nullopt;
    }
    Admission a;
    a.caller = std::move(outcome.caller);
    a.proposal = std::move(*p);
    return a;
}

void PeerNode::handleEvaluate(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e) {
    auto a = admit(conn, e, false);
    if (!a) return;
    std::vector<std::string> args;
    for (const auto& arg : a->proposal.args) args.push_back(canon::bytesToString(arg));
    ContractResult cr;
    {
        std::lock_guard lock(stateMu_);
        SimulationContext ctx(state_);
        cr = runContract(ctx, a->caller, a->proposal.contractOp, args,
                         a->proposal.clientTimestampMs);
    }
    conn->send(net::makeAck(e.ref, Json{{"result", canon::b64(cr.payloadBytes())},
                                        {"ok", cr.ok}}));
}

void PeerNode::handleEndorse(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e) {
    auto a = admit(conn, e, true);
    if (!a) return;
    EndorseOutcome outcome;
    {
        std::lock_guard lock(stateMu_);
        outcome = simulateProposal(state_, opt_.identity, a->proposal, a->caller);
    }
    conn->send(net::makeAck(e.ref, Json{{"outcome", outcome.toJson()}}));
}

std::optional<EndorseOutcome> PeerNode::endorseRemote(const std::string& org,
                                                      const Json& proposalJson,
                                                      std::string& firstError) {
    std::size_t orgIdx = opt_.topo.orgs.size();
    for (std::size_t i = 0; i < opt_.topo.orgs.size(); ++i)
        if (opt_.topo.orgs[i].name == org) orgIdx = i;
    if (orgIdx == opt_.topo.orgs.size()) return std::nullopt;
    int peers = opt_.topo.orgs[orgIdx].peers;
    unsigned start;
    {
        std::lock_guard lock(linkMu_);
        start = endorseRr_[org]++;
    }
    for (int attempt = 0; attempt < peers; ++attempt) {
        int peerIdx = static_cast<int>((start + attempt) % peers);
        int port = opt_.topo.peerPort(orgIdx, peerIdx);
        std::string key = "127.0.0.1:" + std::to_string(port);
        std::shared_ptr<net::MuxClient> link;
        {
            std::lock_guard lock(linkMu_);
            auto it = endorseLinks_.find(key);
            if (it != endorseLinks_.end() && it->second->alive()) link = it->second;
        }
        if (!link) {
            int delay = org == opt_.org ? 0 : opt_.topo.interOrgDelayMs;
            link = net::MuxClient::dial("127.0.0.1", port, delay);
            if (!link) continue;
            std::lock_guard lock(linkMu_);
            endorseLinks_[key] = link;
        }
        net::Envelope req;
        req.type = "Endorse";
        req.payload = Json{{"proposal", proposalJson}};
        auto resp = link->call(std::move(req), 8000);
        if (!resp) continue;
        if (resp->type == "Error") {
            if (firstError.empty()) firstError = resp->payload.value("code", "endorse_failed");
            continue;
        }
        auto outcome = EndorseOutcome::fromJson(resp->payload.value("outcome", Json()));
        if (outcome) return outcome;
    }
    return std::nullopt;
}

bool PeerNode::broadcastTx(const Bytes& txBytes, std::string& error) {
    std::string tx64 = canon::b64(txBytes);
    int orderers = opt_.topo.ordering.nodes;
    for (int attempt = 0; attempt < 10 * orderers; ++attempt) {
        std::shared_ptr<net::MuxClient> link;
        int idx;
        {
            std::lock_guard lock(ordMu_);
            idx = ordIdx_;
            if (ordLink_ && ordLink_->alive()) link = ordLink_;
        }
        if (!link) {
            link = net::MuxClient::dial("127.0.0.1", opt_.topo.ordererPort(idx));
            if (!link) {
                std::lock_guard lock(ordMu_);
                ordIdx_ = (idx + 1) % orderers;
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
                continue;
            }
            std::lock_guard lock(ordMu_);
            ordLink_ = link;
        }
        net::Envelope req;
        req.type = "Broadcast";
        req.payload = Json{{"tx", tx64}};
        orderingBroadcasts_.fetch_add(1);
        auto resp = link->call(std::move(req), 5000);
        if (resp && resp->type == "Ack") return true;
        std::lock_guard lock(ordMu_);
        ordLink_.reset();
        if (resp && resp->type == "Error") {
            auto code = resp->payload.value("code", "");
            if (code == "too_large") {
                error = "too_large";
                return false;
            }
            if (code == "not_leader") {
                auto hint = resp->payload["data"].value("hint", "");
                auto dash = hint.rfind('-');
                if (dash != std::string::npos) {
                    try {
                        ordIdx_ = std::stoi(hint.substr(dash + 1)) % orderers;
                        continue;
                    } catch (...) {
                    }
                }
            }
        }
        ordIdx_ = (idx + 1) % orderers;
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    error = "ordering_unavailable";
    return false;
}

void PeerNode::handleSubmit(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e) {
    auto a = admit(conn, e, true);
    if (!a) return;
    auto timeoutMs = std::clamp<std::int64_t>(
        e.payload.value("timeoutMs", opt_.defaultSubmitTimeoutMs), 1000, 120000);

    // One simulation per policy org; ours is local.
    Json proposalJson = a->proposal.toJson();
    std::vector<EndorseOutcome> outcomes;
    std::string remoteError;
    std::set<std::string> endorsedOrgs;
    for (const auto& org : policy_.orgSet) {
        std::optional<EndorseOutcome> outcome;
        if (org == opt_.org) {
            std::lock_guard lock(stateMu_);
            outcome = simulateProposal(state_, opt_.identity, a->proposal, a->caller);
        } else {
            outcome = endorseRemote(org, proposalJson, remoteError);
        }
        if (!outcome) continue;
        if (!outcome->endorsed) {
            // The operation itself failed; all honest endorsers agree, so
            // surface the first contract error without making a tx.
            conn->send(net::makeAck(e.ref, Json{{"txId", a->proposal.txId},
                                                {"code", "SIMULATION_ERROR"},
                                                {"errorCode", outcome->errorCode},
                                                {"result", canon::b64(outcome->resultPayload)}}));
            return;
        }
        endorsedOrgs.insert(org);
        outcomes.push_back(std::move(*outcome));
    }
    if (endorsedOrgs.size() < policy_.required()) {
        conn->send(net::makeError(e.ref, "endorsement_unavailable",
                                  remoteError.empty() ? "not enough endorsing organizations"
                                                      : remoteError));
        return;
    }
    auto assembled = assembleTransaction(a->proposal, outcomes);
    if (!assembled.tx) {
        conn->send(net::makeError(e.ref, "endorsement_mismatch", assembled.error));
        return;
    }
    Bytes txBytes = canon::dumpBytes(assembled.tx->toJson());

    // Watch first: a fast commit must not race past its own watcher.
    {
        std::lock_guard lock(watchMu_);
        watches_[a->proposal.txId].push_back(
            Watch{conn, e.ref, canon::nowMs() + timeoutMs});
    }
    std::string error;
    if (!broadcastTx(txBytes, error)) {
        {
            std::lock_guard lock(watchMu_);
            watches_.erase(a->proposal.txId);
        }
        conn->send(net::makeError(e.ref, error, "transaction not accepted for ordering"));
        return;
    }
    // The commit watcher or the janitor answers from here on.
}

void PeerNode::handleSubscribe(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e) {
    if (!e.signatureValid()) {
        conn->send(net::makeError(e.ref, "bad_signature", "subscriptions must be signed"));
        return;
    }
    VerifyResult vr;
    {
        std::shared_lock lock(memberMu_);
        vr = certCache_.verify(members_, *e.senderCertificate, canon::nowMs());
    }
    if (!vr.ok()) {
        conn->send(net::makeError(e.ref, "cert_invalid", verifyErrorToString(vr.error)));
        return;
    }
    auto sub = std::make_unique<Subscription>();
    sub->conn = conn;
    sub->ref = e.ref;
    auto filter = e.payload.value("filter", Json::object());
    if (filter.contains("orgId") && filter.contains("deviceId")) {
        sub->filterDevice = true;
        sub->orgId = filter["orgId"].get<std::string>();
        sub->deviceId = filter["deviceId"].get<std::string>();
    }
    if (filter.contains("requesterId")) {
        sub->filterRequester = true;
        sub->requesterId = filter["requesterId"].get<std::string>();
    }
    {
        std::lock_guard lock(eventMu_);
        if (e.payload.contains("from")) {
            auto fromBlock = e.payload["from"].value("block", std::int64_t{0});
            auto fromTx = e.payload["from"].value("tx", std::int64_t{-1});
            std::size_t idx = 0;
            while (idx < events_.size() &&
                   (events_[idx].blockNumber < fromBlock ||
                    (events_[idx].blockNumber == fromBlock && events_[idx].txIndex <= fromTx)))
                ++idx;
            sub->next = idx;
        } else {
            sub->next = events_.size();  // new events only
        }
    }
    conn->send(net::makeAck(e.ref));
    Subscription* raw = sub.get();
    sub->sender = std::thread([this, raw] { subscriptionLoop(raw); });
    std::lock_guard lock(subMu_);
    subs_.push_back(std::move(sub));
}

bool PeerNode::eventMatches(const Subscription& s, const CommitEvent& ev) {
    if (!s.filterDevice && !s.filterRequester) return true;
    if (s.filterDevice && ev.targetOrgId == s.orgId && ev.targetDeviceId == s.deviceId)
        return true;
    if (s.filterRequester && !ev.requesterId.empty() && ev.requesterId == s.requesterId)
        return true;
    return false;
}

void PeerNode::subscriptionLoop(Subscription* sub) {
    while (running_.load()) {
        CommitEvent ev;
        {
            std::unique_lock lock(eventMu_);
            eventCv_.wait(lock, [&] { return !running_.load() || sub->next < events_.size(); });
            if (!running_.load()) return;
            ev = events_[sub->next];
        }
        ++sub->next;
        if (!eventMatches(*sub, ev)) continue;
        net::Envelope push;
        push.type = "Event";
        push.ref = sub->ref;
        push.payload = ev.toJson();
        if (!sub->conn->send(push)) return;
    }
}

void PeerNode::deliverLoop() {
    int which = 0;
    while (running_.load()) {
        int port = opt_.topo.ordererPort(which % opt_.topo.ordering.nodes);
        ++which;
        auto conn = net::dial("127.0.0.1", port);
        if (!conn) {
            std::this_thread::sleep_for(std::chrono::milliseconds(200));
            continue;
        }
        {
            std::lock_guard lock(deliverMu_);
            deliverConn_ = conn;
        }
        net::Envelope req;
        req.type = "Deliver";
        req.ref = 1;
        req.payload = Json{{"from", height()}};
        if (!conn->send(req)) continue;
        while (running_.load()) {
            auto frame = conn->recv();
            if (!frame) break;
            if (frame->type == "Ack") continue;
            if (frame->type != "Block") break;
            auto block = Block::fromJson(frame->payload.value("block", Json()));
            if (!block) break;
            if (!commitBlock(std::move(*block))) break;
        }
        {
            std::lock_guard lock(deliverMu_);
            deliverConn_.reset();
        }
        // Brief pause so a persistent fork or flapping orderer cannot turn
        // this loop into a busy spin.
        if (running_.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
}

bool PeerNode::commitBlock(Block block) {
    Block committed;
    {
        std::lock_guard lock(stateMu_);
        if (block.number < store_.height()) return true;  // already have it
        if (block.number != store_.height() || block.prevHash != store_.headHash())
            return false;  // gap or fork; resync from another orderer
        block.commitMetadata = validator_->validateBlock(state_, block);
        if (store_.append(block) != AppendError::Ok) return false;
        committed = std::move(block);
    }
    fireWatches(committed);
    appendEvents(committed);
    return true;
}

void PeerNode::fireWatches(const Block& block) {
    std::vector<std::tuple<std::shared_ptr<net::Conn>, std::int64_t, Json>> replies;
    {
        std::lock_guard lock(watchMu_);
        for (std::size_t i = 0; i < block.transactions.size(); ++i) {
            auto it = watches_.find(block.transactions[i].txId);
            if (it == watches_.end()) continue;
            Json payload{{"txId", block.transactions[i].txId},
                         {"code", validationCodeToString(block.commitMetadata[i])},
                         {"blockNumber", block.number}};
            for (auto& w : it->second)
                if (auto conn = w.conn.lock()) replies.emplace_back(conn, w.ref, payload);
            watches_.erase(it);
        }
    }
    for (auto& [conn, ref, payload] : replies) conn->send(net::makeAck(ref, payload));
}

void PeerNode::appendEvents(const Block& block) {
    std::vector<CommitEvent> fresh;
    for (std::size_t i = 0; i < block.transactions.size(); ++i) {
        const auto& tx = block.transactions[i];
        CommitEvent ev;
        ev.blockNumber = block.number;
        ev.txIndex = static_cast<std::int64_t>(i);
        ev.txId = tx.txId;
        ev.code = block.commitMetadata[i];
        ev.contractOp = tx.contractOp;
        if (ev.code == ValidationCode::VALID) {
            for (const auto& w : tx.writeSet) {
                if (!w.value) continue;
                if (w.key.rfind("req/", 0) == 0) {
                    auto j = canon::parse(*w.value);
                    if (!j) continue;
                    auto rec = ServiceRequestRecord::fromJson(*j);
                    if (!rec) continue;
                    ev.targetOrgId = rec->service.organizationId;
                    ev.targetDeviceId = rec->service.deviceId;
                    ev.requestId = rec->id;
                } else if (w.key.rfind("rsp/", 0) == 0) {
                    auto j = canon::parse(*w.value);
                    if (!j) continue;
                    auto rec = ServiceResponseRecord::fromJson(*j);
                    if (!rec) continue;
                    ev.requestId = rec->requestId;
                    // The requester comes from the request record; if it
                    // was removed in this same block the response event
                    // still fires, just without a requester route.
                    std::lock_guard lock(stateMu_);
                    if (auto key = makeRequestKey(rec->requestId)) {
                        if (const auto* entry = state_.get(*key)) {
                            if (auto reqJson = canon::parse(entry->value)) {
                                if (auto req = ServiceRequestRecord::fromJson(*reqJson))
                                    ev.requesterId = req->requesterId;
                            }
                        }
                    }
                }
            }
        }
        fresh.push_back(std::move(ev));
    }
    {
        std::lock_guard lock(eventMu_);
        for (auto& ev : fresh) events_.push_back(std::move(ev));
    }
    eventCv_.notify_all();
}

void PeerNode::handleStats(const std::shared_ptr<net::Conn>& conn, const net::Envelope& e) {
    auto ps = readProcStats();
    std::int64_t h;
    std::string hash;
    {
        std::lock_guard lock(stateMu_);
        h = store_.height();
        hash = state_.contentHash();
    }
    conn->send(net::makeAck(
        e.ref, Json{{"cpuTicks", ps.cpuTicks},
                    {"ticksPerSecond", ps.ticksPerSecond},
                    {"memBytes", ps.memBytes},
                    {"diskReadBytes", ps.diskReadBytes},
                    {"diskWriteBytes", ps.diskWriteBytes},
                    {"netInBytes", net::bytesIn()},
                    {"netOutBytes", net::bytesOut()},
                    {"orderingBroadcasts", orderingBroadcasts_.load()},
                    {"height", h},
                    {"stateHash", hash},
                    {"timeMs", canon::nowMs()}}));
}

} // namespace iotbc
