#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iotbc/canon.hpp"
#include "iotbc/crypto.hpp"
#include "iotbc/identity.hpp"

namespace iotbc {

struct Version {
    std::int64_t blockNumber = 0;
    std::int64_t txIndex = 0;

    auto operator<=>(const Version&) const = default;

    Json toJson() const;
    static std::optional<Version> fromJson(const Json& j);
};

// version == nullopt records a read that found the key absent.
struct ReadEntry {
    std::string key;
    std::optional<Version> version;

    bool operator==(const ReadEntry&) const = default;
};

// value == nullopt is a delete marker.
struct WriteEntry {
    std::string key;
    std::optional<Bytes> value;

    bool operator==(const WriteEntry&) const = default;
};

struct Endorsement {
    Certificate endorserCert;
    Bytes signature;
};

struct Transaction {
    std::string txId;
    Certificate creatorCert;
    std::string contractOp;
    std::vector<Bytes> args;
    std::int64_t clientTimestampMs = 0;
    std::vector<ReadEntry> readSet;
    std::vector<WriteEntry> writeSet;
    Bytes resultPayload;
    std::vector<Endorsement> endorsements;

    Json toJson() const;
    static std::optional<Transaction> fromJson(const Json& j);

    // The simulated results an endorser signs: txId, read set, write set
    // and result payload in canonical form. Byte-identical across peers
    // iff simulation was deterministic.
    Bytes endorsedBytes() const;
};

Json readSetToJson(const std::vector<ReadEntry>& rs);
Json writeSetToJson(const std::vector<WriteEntry>& ws);
std::optional<std::vector<ReadEntry>> readSetFromJson(const Json& j);
std::optional<std::vector<WriteEntry>> writeSetFromJson(const Json& j);

enum class ValidationCode {
    VALID,
    MVCC_CONFLICT,
    ENDORSEMENT_POLICY_FAILURE,
    BAD_SIGNATURE,
    DUPLICATE_TXID,
    ACCESS_DENIED,
};

std::string validationCodeToString(ValidationCode c);
std::optional<ValidationCode> validationCodeFromString(const std::string& s);

struct Block {
    std::int64_t number = 0;
    Bytes prevHash;  // 32 bytes
    Bytes dataHash;  // 32 bytes
    std::vector<Transaction> transactions;
    // Assigned at commit, one code per transaction. Deliberately outside
    // dataHash and the block hash: ordering nodes never see execution
    // results.
    std::vector<ValidationCode> commitMetadata;

    Json toJson() const;
    static std::optional<Block> fromJson(const Json& j);

    static Bytes computeDataHash(const std::vector<Transaction>& txs);
    static Block makeGenesis();
};

// Hash over the canonical header (number, prevHash, dataHash).
Bytes computeBlockHash(const Block& b);

enum class AppendError { Ok, HeightMismatch, PrevHashMismatch };

// In-memory chain with an optional append-only backing file of
// length-prefixed canonical block encodings.
class BlockStore {
public:
    BlockStore() = default;

    // Loads any blocks already in the file; subsequent appends write
    // through. A partial trailing record (torn write) is dropped.
    static std::optional<BlockStore> open(const std::string& path);

    AppendError append(Block b);

    std::int64_t height() const { return static_cast<std::int64_t>(blocks_.size()); }
    const Block& at(std::int64_t number) const { return blocks_.at(static_cast<size_t>(number)); }
    const std::vector<Block>& blocks() const { return blocks_; }
    Bytes headHash() const;

    // nullopt when consistent, else the first block whose number, hashes
    // or linkage fail to recompute.
    std::optional<std::int64_t> verifyChain() const;

private:
    std::vector<Block> blocks_;
    std::string path_;  // empty = memory only

    bool persist(const Block& b);
};

struct StateEntry {
    Bytes value;
    Version version;

    bool operator==(const StateEntry&) const = default;
};

class WorldState {
public:
    const StateEntry* get(const std::string& key) const;
    void applyWriteSet(const std::vector<WriteEntry>& ws, Version version);

    // All entries whose key starts with prefix, in key order.
    std::vector<std::pair<std::string, StateEntry>> scanPrefix(const std::string& prefix) const;

    std::size_t size() const { return entries_.size(); }

    // Hash of the canonical encoding of the full state. Equal hashes mean
    // byte-identical states.
    std::string contentHash() const;

    Json toJson() const;
    static std::optional<WorldState> fromJson(const Json& j);

private:
    std::map<std::string, StateEntry> entries_;
};

} // namespace iotbc
