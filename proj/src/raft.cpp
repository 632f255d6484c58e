#include "iotbc/raft.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "iotbc/identity.hpp"

namespace iotbc::raft {

Json LogEntry::toJson() const {
    return Json{{"term", term}, {"noop", noop}, {"payload", canon::b64(payload)}};
}

std::optional<LogEntry> LogEntry::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        LogEntry e;
        e.term = j.at("term").get<std::int64_t>();
        e.noop = j.at("noop").get<bool>();
        auto p = canon::fromB64(j.at("payload").get<std::string>());
        if (!p) return std::nullopt;
        e.payload = std::move(*p);
        return e;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

void MemoryStorage::saveMeta(std::int64_t term, const std::string& votedFor) {
    state_.currentTerm = term;
    state_.votedFor = votedFor;
}

void MemoryStorage::truncateAndAppend(std::int64_t fromIndex,
                                      const std::vector<LogEntry>& entries) {
    state_.log.resize(static_cast<std::size_t>(fromIndex - 1));
    state_.log.insert(state_.log.end(), entries.begin(), entries.end());
}

PersistentState MemoryStorage::load() { return state_; }

FileStorage::FileStorage(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::string FileStorage::metaPath() const { return dir_ + "/raft_meta.json"; }
std::string FileStorage::logPath() const { return dir_ + "/raft_log.bin"; }

void FileStorage::saveMeta(std::int64_t term, const std::string& votedFor) {
    saveJsonFile(metaPath(), Json{{"currentTerm", term}, {"votedFor", votedFor}});
}

namespace {

void writeRecord(std::ofstream& out, const Json& j) {
    std::string payload = canon::dump(j);
    auto len = static_cast<std::uint32_t>(payload.size());
    unsigned char lenBuf[4] = {static_cast<unsigned char>(len >> 24),
                               static_cast<unsigned char>(len >> 16),
                               static_cast<unsigned char>(len >> 8),
                               static_cast<unsigned char>(len)};
    out.write(reinterpret_cast<const char*>(lenBuf), 4);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

std::vector<Json> readRecords(const std::string& path) {
    std::vector<Json> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    for (;;) {
        unsigned char lenBuf[4];
        in.read(reinterpret_cast<char*>(lenBuf), 4);
        if (in.gcount() != 4) break;
        std::uint32_t len = (std::uint32_t(lenBuf[0]) << 24) |
                            (std::uint32_t(lenBuf[1]) << 16) |
                            (std::uint32_t(lenBuf[2]) << 8) | std::uint32_t(lenBuf[3]);
        std::string payload(len, '\0');
        in.read(payload.data(), len);
        if (static_cast<std::uint32_t>(in.gcount()) != len) break;  // torn tail
        auto j = canon::parse(payload);
        if (!j) break;
        out.push_back(std::move(*j));
    }
    return out;
}

} // namespace

void FileStorage::truncateAndAppend(std::int64_t fromIndex,
                                    const std::vector<LogEntry>& entries) {
    if (knownLength_ < 0) knownLength_ = static_cast<std::int64_t>(load().log.size());
    if (fromIndex <= knownLength_) {
        // Conflict repair: drop the divergent suffix by rewriting.
        auto current = load().log;
        current.resize(static_cast<std::size_t>(fromIndex - 1));
        current.insert(current.end(), entries.begin(), entries.end());
        rewriteLog(current);
        knownLength_ = static_cast<std::int64_t>(current.size());
        return;
    }
    std::ofstream out(logPath(), std::ios::binary | std::ios::app);
    for (const auto& e : entries) writeRecord(out, e.toJson());
    out.flush();
    knownLength_ += static_cast<std::int64_t>(entries.size());
}

void FileStorage::rewriteLog(const std::vector<LogEntry>& entries) {
    std::string tmp = logPath() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        for (const auto& e : entries) writeRecord(out, e.toJson());
        out.flush();
    }
    std::filesystem::rename(tmp, logPath());
}

PersistentState FileStorage::load() {
    PersistentState st;
    if (auto meta = loadJsonFile(metaPath())) {
        st.currentTerm = meta->value("currentTerm", std::int64_t{0});
        st.votedFor = meta->value("votedFor", std::string{});
    }
    for (const auto& j : readRecords(logPath())) {
        auto e = LogEntry::fromJson(j);
        if (!e) break;
        st.log.push_back(std::move(*e));
    }
    knownLength_ = static_cast<std::int64_t>(st.log.size());
    return st;
}

namespace {

const char* kindName(MessageKind k) {
    switch (k) {
        case MessageKind::VoteRequest: return "vote_request";
        case MessageKind::VoteResponse: return "vote_response";
        case MessageKind::AppendEntries: return "append_entries";
        case MessageKind::AppendResponse: return "append_response";
    }
    return "vote_request";
}

std::optional<MessageKind> kindFromName(const std::string& s) {
    if (s == "vote_request") return MessageKind::VoteRequest;
    if (s == "vote_response") return MessageKind::VoteResponse;
    if (s == "append_entries") return MessageKind::AppendEntries;
    if (s == "append_response") return MessageKind::AppendResponse;
    return std::nullopt;
}

} // namespace

Json Message::toJson() const {
    Json j;
    j["kind"] = kindName(kind);
    j["from"] = from;
    j["to"] = to;
    j["term"] = term;
    j["lastLogIndex"] = lastLogIndex;
    j["lastLogTerm"] = lastLogTerm;
    j["granted"] = granted;
    j["prevLogIndex"] = prevLogIndex;
    j["prevLogTerm"] = prevLogTerm;
    Json arr = Json::array();
    for (const auto& e : entries) arr.push_back(e.toJson());
    j["entries"] = std::move(arr);
    j["leaderCommit"] = leaderCommit;
    j["success"] = success;
    j["matchIndex"] = matchIndex;
    return j;
}

std::optional<Message> Message::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        Message m;
        auto k = kindFromName(j.at("kind").get<std::string>());
        if (!k) return std::nullopt;
        m.kind = *k;
        m.from = j.at("from").get<std::string>();
        m.to = j.at("to").get<std::string>();
        m.term = j.at("term").get<std::int64_t>();
        m.lastLogIndex = j.at("lastLogIndex").get<std::int64_t>();
        m.lastLogTerm = j.at("lastLogTerm").get<std::int64_t>();
        m.granted = j.at("granted").get<bool>();
        m.prevLogIndex = j.at("prevLogIndex").get<std::int64_t>();
        m.prevLogTerm = j.at("prevLogTerm").get<std::int64_t>();
        for (const auto& e : j.at("entries")) {
            auto entry = LogEntry::fromJson(e);
            if (!entry) return std::nullopt;
            m.entries.push_back(std::move(*entry));
        }
        m.leaderCommit = j.at("leaderCommit").get<std::int64_t>();
        m.success = j.at("success").get<bool>();
        m.matchIndex = j.at("matchIndex").get<std::int64_t>();
        return m;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Node::Node(std::string id, std::vector<std::string> peers, Storage& storage,
           std::uint64_t seed, std::int64_t electionTimeoutMinMs,
           std::int64_t electionTimeoutMaxMs, std::int64_t heartbeatMs)
    : id_(std::move(id)),
      peers_(std::move(peers)),
      storage_(storage),
      rng_(seed),
      electionTimeoutMinMs_(electionTimeoutMinMs),
      electionTimeoutMaxMs_(electionTimeoutMaxMs),
      heartbeatMs_(heartbeatMs) {
    peers_.erase(std::remove(peers_.begin(), peers_.end(), id_), peers_.end());
    PersistentState st = storage_.load();
    currentTerm_ = st.currentTerm;
    votedFor_ = st.votedFor;
    log_ = std::move(st.log);
}

std::int64_t Node::termAt(std::int64_t index) const {
    if (index <= 0 || index > lastLogIndex()) return 0;
    return log_[static_cast<std::size_t>(index - 1)].term;
}

void Node::resetElectionTimer(std::int64_t nowMs) {
    auto span = electionTimeoutMaxMs_ - electionTimeoutMinMs_;
    electionDeadlineMs_ =
            nowMs + electionTimeoutMinMs_ + (span > 0 ? std::int64_t(rng_() % span) : 0);
}

void Node::persistMeta() { storage_.saveMeta(currentTerm_, votedFor_); }

void Node::becomeFollower(std::int64_t term, std::int64_t nowMs) {
    if (term > currentTerm_) {
        currentTerm_ = term;
        votedFor_.clear();
        persistMeta();
    }
    role_ = NodeRole::Follower;
    votesGranted_.clear();
    resetElectionTimer(nowMs);
}

Effects Node::tick(std::int64_t nowMs) {
    Effects fx;
    if (electionDeadlineMs_ == 0) resetElectionTimer(nowMs);
    if (role_ == NodeRole::Leader) {
        if (nowMs >= heartbeatDueMs_) {
            heartbeatDueMs_ = nowMs + heartbeatMs_;
            broadcastAppends(fx);
        }
        return fx;
    }
    // Solo cluster: no peers means this node is trivially leader.
    if (peers_.empty()) {
        startElection(nowMs, fx);
        return fx;
    }
    if (nowMs >= electionDeadlineMs_) startElection(nowMs, fx);
    return fx;
}

void Node::startElection(std::int64_t nowMs, Effects& fx) {
    role_ = NodeRole::Candidate;
    ++currentTerm_;
    votedFor_ = id_;
    persistMeta();
    votesGranted_.clear();
    votesGranted_[id_] = true;
    leaderId_.clear();
    resetElectionTimer(nowMs);
    if (votesGranted_.size() >= majority()) {
        becomeLeader(nowMs, fx);
        return;
    }
    for (const auto& p : peers_) {
        Message m;
        m.kind = MessageKind::VoteRequest;
        m.from = id_;
        m.to = p;
        m.term = currentTerm_;
        m.lastLogIndex = lastLogIndex();
        m.lastLogTerm = termAt(lastLogIndex());
        fx.outbound.push_back(std::move(m));
    }
}

void Node::becomeLeader(std::int64_t nowMs, Effects& fx) {
    role_ = NodeRole::Leader;
    leaderId_ = id_;
    fx.becameLeader = true;
    for (const auto& p : peers_) {
        nextIndex_[p] = lastLogIndex() + 1;
        matchIndex_[p] = 0;
    }
    // Barrier entry: commits everything from earlier terms once it
    // replicates, so a fresh leader can advance the commit index.
    LogEntry noop;
    noop.term = currentTerm_;
    noop.noop = true;
    log_.push_back(noop);
    storage_.truncateAndAppend(lastLogIndex(), {noop});
    heartbeatDueMs_ = nowMs + heartbeatMs_;
    broadcastAppends(fx);
    advanceCommit(fx);
}

Message Node::makeAppend(const std::string& peer) const {
    Message m;
    m.kind = MessageKind::AppendEntries;
    m.from = id_;
    m.to = peer;
    m.term = currentTerm_;
    std::int64_t next = nextIndex_.at(peer);
    m.prevLogIndex = next - 1;
    m.prevLogTerm = termAt(next - 1);
    for (std::int64_t i = next; i <= lastLogIndex(); ++i)
        m.entries.push_back(log_[static_cast<std::size_t>(i - 1)]);
    m.leaderCommit = commitIndex_;
    return m;
}

void Node::broadcastAppends(Effects& fx) {
    for (const auto& p : peers_) fx.outbound.push_back(makeAppend(p));
}

void Node::advanceCommit(Effects& fx) {
    if (role_ == NodeRole::Leader) {
        for (std::int64_t n = lastLogIndex(); n > commitIndex_; --n) {
            if (termAt(n) != currentTerm_) break;  // only own-term entries directly
            std::size_t acks = 1;  // self
            for (const auto& [peer, match] : matchIndex_)
                if (match >= n) ++acks;
            if (acks >= majority()) {
                commitIndex_ = n;
                break;
            }
        }
    }
    deliverCommitted(fx);
}

void Node::deliverCommitted(Effects& fx) {
    while (lastDelivered_ < commitIndex_) {
        ++lastDelivered_;
        fx.committed.push_back(
                {lastDelivered_, log_[static_cast<std::size_t>(lastDelivered_ - 1)]});
    }
}

Effects Node::handle(const Message& m, std::int64_t nowMs) {
    Effects fx;
    if (m.term > currentTerm_) {
        bool wasLeader = role_ == NodeRole::Leader;
        becomeFollower(m.term, nowMs);
        if (wasLeader) fx.steppedDown = true;
    }
    switch (m.kind) {
        case MessageKind::VoteRequest: handleVoteRequest(m, nowMs, fx); break;
        case MessageKind::VoteResponse: handleVoteResponse(m, nowMs, fx); break;
        case MessageKind::AppendEntries: handleAppendEntries(m, nowMs, fx); break;
        case MessageKind::AppendResponse: handleAppendResponse(m, fx); break;
    }
    return fx;
}

void Node::handleVoteRequest(const Message& m, std::int64_t nowMs, Effects& fx) {
    Message reply;
    reply.kind = MessageKind::VoteResponse;
    reply.from = id_;
    reply.to = m.from;
    reply.term = currentTerm_;
    reply.granted = false;
    if (m.term == currentTerm_ && (votedFor_.empty() || votedFor_ == m.from)) {
        bool upToDate = m.lastLogTerm > termAt(lastLogIndex()) ||
                        (m.lastLogTerm == termAt(lastLogIndex()) &&
                         m.lastLogIndex >= lastLogIndex());
        if (upToDate) {
            votedFor_ = m.from;
            persistMeta();
            reply.granted = true;
            resetElectionTimer(nowMs);
        }
    }
    fx.outbound.push_back(std::move(reply));
}

void Node::handleVoteResponse(const Message& m, std::int64_t nowMs, Effects& fx) {
    if (role_ != NodeRole::Candidate || m.term != currentTerm_ || !m.granted) return;
    votesGranted_[m.from] = true;
    if (votesGranted_.size() >= majority()) becomeLeader(nowMs, fx);
}

void Node::handleAppendEntries(const Message& m, std::int64_t nowMs, Effects& fx) {
    Message reply;
    reply.kind = MessageKind::AppendResponse;
    reply.from = id_;
    reply.to = m.from;
    reply.term = currentTerm_;
    reply.success = false;
    reply.matchIndex = 0;

    if (m.term < currentTerm_) {
        fx.outbound.push_back(std::move(reply));
        return;
    }
    // Same-term append: the sender is the leader of this term.
    if (role_ != NodeRole::Follower) becomeFollower(m.term, nowMs);
    leaderId_ = m.from;
    resetElectionTimer(nowMs);

    if (m.prevLogIndex > lastLogIndex() || termAt(m.prevLogIndex) != m.prevLogTerm) {
        fx.outbound.push_back(std::move(reply));
        return;
    }

    // Append, dropping any conflicting suffix exactly once.
    std::int64_t index = m.prevLogIndex;
    std::size_t offset = 0;
    for (; offset < m.entries.size(); ++offset) {
        std::int64_t at = index + 1 + static_cast<std::int64_t>(offset);
        if (at > lastLogIndex()) break;
        if (termAt(at) != m.entries[offset].term) {
            log_.resize(static_cast<std::size_t>(at - 1));
            break;
        }
    }
    if (offset < m.entries.size()) {
        std::vector<LogEntry> fresh(m.entries.begin() + static_cast<std::ptrdiff_t>(offset),
                                    m.entries.end());
        std::int64_t from = index + 1 + static_cast<std::int64_t>(offset);
        log_.insert(log_.end(), fresh.begin(), fresh.end());
        storage_.truncateAndAppend(from, fresh);
    }

    std::int64_t lastNew = m.prevLogIndex + static_cast<std::int64_t>(m.entries.size());
    if (m.leaderCommit > commitIndex_) commitIndex_ = std::min(m.leaderCommit, lastNew);
    reply.success = true;
    reply.matchIndex = lastNew;
    fx.outbound.push_back(std::move(reply));
    deliverCommitted(fx);
}

void Node::handleAppendResponse(const Message& m, Effects& fx) {
    if (role_ != NodeRole::Leader || m.term != currentTerm_) return;
    if (m.success) {
        matchIndex_[m.from] = std::max(matchIndex_[m.from], m.matchIndex);
        nextIndex_[m.from] = matchIndex_[m.from] + 1;
        advanceCommit(fx);
        if (nextIndex_[m.from] <= lastLogIndex()) fx.outbound.push_back(makeAppend(m.from));
    } else {
        nextIndex_[m.from] = std::max<std::int64_t>(1, nextIndex_[m.from] - 1);
        fx.outbound.push_back(makeAppend(m.from));
    }
}

SubmitResult Node::submit(Bytes payload, std::int64_t nowMs) {
    SubmitResult result;
    if (role_ != NodeRole::Leader) {
        result.leaderHint = leaderId_;
        return result;
    }
    LogEntry e;
    e.term = currentTerm_;
    e.payload = std::move(payload);
    log_.push_back(e);
    storage_.truncateAndAppend(lastLogIndex(), {e});
    result.accepted = true;
    result.index = lastLogIndex();
    broadcastAppends(result.effects);
    heartbeatDueMs_ = nowMs + heartbeatMs_;
    // A solo cluster commits immediately.
    advanceCommit(result.effects);
    return result;
}

} // namespace iotbc::raft
