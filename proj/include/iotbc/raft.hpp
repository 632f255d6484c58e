#pragma once

// Leader-based replicated log: randomized election timeouts, majority
// votes, majority-ack replication, persisted term/vote/log. No membership
// changes, no snapshots. The node is a pure state machine driven from
// outside via tick/handle/submit; every call returns the messages to send
// and the entries newly safe to deliver, so tests can control time and
// delivery exactly.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iotbc/canon.hpp"

namespace iotbc::raft {

struct LogEntry {
    std::int64_t term = 0;
    bool noop = false;  // barrier entry appended at term start
    Bytes payload;

    bool operator==(const LogEntry&) const = default;

    Json toJson() const;
    static std::optional<LogEntry> fromJson(const Json& j);
};

struct PersistentState {
    std::int64_t currentTerm = 0;
    std::string votedFor;  // empty = none
    std::vector<LogEntry> log;  // log[i] holds index i+1
};

class Storage {
public:
    virtual ~Storage() = default;
    virtual void saveMeta(std::int64_t term, const std::string& votedFor) = 0;
    // Drops entries at 1-based indexes >= fromIndex, then appends.
    virtual void truncateAndAppend(std::int64_t fromIndex,
                                   const std::vector<LogEntry>& entries) = 0;
    virtual PersistentState load() = 0;
};

class MemoryStorage final : public Storage {
public:
    void saveMeta(std::int64_t term, const std::string& votedFor) override;
    void truncateAndAppend(std::int64_t fromIndex,
                           const std::vector<LogEntry>& entries) override;
    PersistentState load() override;

private:
    PersistentState state_;
};

// meta: one canonical record, rewritten atomically. log: append-only
// records; a truncation rewrites the whole file (rare, conflict repair).
class FileStorage final : public Storage {
public:
    explicit FileStorage(std::string dir);
    void saveMeta(std::int64_t term, const std::string& votedFor) override;
    void truncateAndAppend(std::int64_t fromIndex,
                           const std::vector<LogEntry>& entries) override;
    PersistentState load() override;

private:
    std::string dir_;
    std::int64_t knownLength_ = -1;  // entries currently in the log file

    std::string metaPath() const;
    std::string logPath() const;
    void rewriteLog(const std::vector<LogEntry>& entries);
};

enum class MessageKind { VoteRequest, VoteResponse, AppendEntries, AppendResponse };

struct Message {
    MessageKind kind = MessageKind::VoteRequest;
    std::string from;
    std::string to;
    std::int64_t term = 0;
    // VoteRequest
    std::int64_t lastLogIndex = 0;
    std::int64_t lastLogTerm = 0;
    // VoteResponse
    bool granted = false;
    // AppendEntries
    std::int64_t prevLogIndex = 0;
    std::int64_t prevLogTerm = 0;
    std::vector<LogEntry> entries;
    std::int64_t leaderCommit = 0;
    // AppendResponse
    bool success = false;
    std::int64_t matchIndex = 0;

    Json toJson() const;
    static std::optional<Message> fromJson(const Json& j);
};

struct Committed {
    std::int64_t index = 0;
    LogEntry entry;
};

struct Effects {
    std::vector<Message> outbound;
    std::vector<Committed> committed;  // in log order, delivered exactly once
    bool becameLeader = false;
    bool steppedDown = false;
};

enum class NodeRole { Follower, Candidate, Leader };

struct SubmitResult {
    bool accepted = false;
    std::string leaderHint;  // best known leader when not accepted
    std::int64_t index = 0;  // log index when accepted
    Effects effects;
};

class Node {
public:
    Node(std::string id, std::vector<std::string> peers, Storage& storage,
         std::uint64_t seed, std::int64_t electionTimeoutMinMs = 300,
         std::int64_t electionTimeoutMaxMs = 600, std::int64_t heartbeatMs = 75);

    Effects tick(std::int64_t nowMs);
    Effects handle(const Message& m, std::int64_t nowMs);
    SubmitResult submit(Bytes payload, std::int64_t nowMs);

    NodeRole role() const { return role_; }
    bool isLeader() const { return role_ == NodeRole::Leader; }
    const std::string& id() const { return id_; }
    std::string leaderHint() const { return leaderId_; }
    std::int64_t term() const { return currentTerm_; }
    std::int64_t commitIndex() const { return commitIndex_; }
    std::int64_t lastLogIndex() const { return static_cast<std::int64_t>(log_.size()); }

private:
    std::string id_;
    std::vector<std::string> peers_;  // excluding self
    Storage& storage_;

    std::int64_t currentTerm_ = 0;
    std::string votedFor_;
    std::vector<LogEntry> log_;

    NodeRole role_ = NodeRole::Follower;
    std::string leaderId_;
    std::int64_t commitIndex_ = 0;
    std::int64_t lastDelivered_ = 0;

    std::map<std::string, std::int64_t> nextIndex_;
    std::map<std::string, std::int64_t> matchIndex_;
    std::map<std::string, bool> votesGranted_;

    std::mt19937_64 rng_;
    std::int64_t electionTimeoutMinMs_;
    std::int64_t electionTimeoutMaxMs_;
    std::int64_t heartbeatMs_;
    std::int64_t electionDeadlineMs_ = 0;
    std::int64_t heartbeatDueMs_ = 0;

    std::size_t majority() const { return (peers_.size() + 1) / 2 + 1; }
    std::int64_t termAt(std::int64_t index) const;  // 0 for index 0
    void resetElectionTimer(std::int64_t nowMs);
    void persistMeta();
    void becomeFollower(std::int64_t term, std::int64_t nowMs);
    void startElection(std::int64_t nowMs, Effects& fx);
    void becomeLeader(std::int64_t nowMs, Effects& fx);
    Message makeAppend(const std::string& peer) const;
    void broadcastAppends(Effects& fx);
    void advanceCommit(Effects& fx);
    void deliverCommitted(Effects& fx);
    void handleVoteRequest(const Message& m, std::int64_t nowMs, Effects& fx);
    void handleVoteResponse(const Message& m, std::int64_t nowMs, Effects& fx);
    void handleAppendEntries(const Message& m, std::int64_t nowMs, Effects& fx);
    void handleAppendResponse(const Message& m, Effects& fx);
};

} // namespace iotbc::raft
