#include "iotbc/ledger.hpp"

#include <cstdio>
#include <fstream>

namespace iotbc {

Json Version::toJson() const {
    return Json{{"blockNumber", blockNumber}, {"txIndex", txIndex}};
}

std::optional<Version> Version::fromJson(const Json& j) {
    if (!j.is_object() || !j.contains("blockNumber") || !j.contains("txIndex"))
        return std::nullopt;
    try {
        return Version{j["blockNumber"].get<std::int64_t>(), j["txIndex"].get<std::int64_t>()};
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Json readSetToJson(const std::vector<ReadEntry>& rs) {
    Json arr = Json::array();
    for (const auto& r : rs) {
        Json e;
        e["key"] = r.key;
        e["version"] = r.version ? r.version->toJson() : Json(nullptr);
        arr.push_back(std::move(e));
    }
    return arr;
}

Json writeSetToJson(const std::vector<WriteEntry>& ws) {
    Json arr = Json::array();
    for (const auto& w : ws) {
        Json e;
        e["key"] = w.key;
        e["value"] = w.value ? Json(canon::b64(*w.value)) : Json(nullptr);
        arr.push_back(std::move(e));
    }
    return arr;
}

std::optional<std::vector<ReadEntry>> readSetFromJson(const Json& j) {
    if (!j.is_array()) return std::nullopt;
    std::vector<ReadEntry> rs;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("key") || !e.contains("version"))
            return std::nullopt;
        ReadEntry r;
        r.key = e["key"].get<std::string>();
        if (!e["version"].is_null()) {
            auto v = Version::fromJson(e["version"]);
            if (!v) return std::nullopt;
            r.version = *v;
        }
        rs.push_back(std::move(r));
    }
    return rs;
}

std::optional<std::vector<WriteEntry>> writeSetFromJson(const Json& j) {
    if (!j.is_array()) return std::nullopt;
    std::vector<WriteEntry> ws;
    for (const auto& e : j) {
        if (!e.is_object() || !e.contains("key") || !e.contains("value")) return std::nullopt;
        WriteEntry w;
        w.key = e["key"].get<std::string>();
        if (!e["value"].is_null()) {
            auto v = canon::fromB64(e["value"].get<std::string>());
            if (!v) return std::nullopt;
            w.value = std::move(*v);
        }
        ws.push_back(std::move(w));
    }
    return ws;
}

Json Transaction::toJson() const {
    Json j;
    j["txId"] = txId;
    j["creatorCert"] = creatorCert.toJson();
    j["contractOp"] = contractOp;
    Json args_ = Json::array();
    for (const auto& a : args) args_.push_back(canon::b64(a));
    j["args"] = std::move(args_);
    j["clientTimestamp"] = canon::formatTimeMs(clientTimestampMs);
    j["readSet"] = readSetToJson(readSet);
    j["writeSet"] = writeSetToJson(writeSet);
    j["resultPayload"] = canon::b64(resultPayload);
    Json ends = Json::array();
    for (const auto& e : endorsements) {
        ends.push_back(Json{{"endorserCert", e.endorserCert.toJson()},
                            {"signature", canon::b64(e.signature)}});
    }
    j["endorsements"] = std::move(ends);
    return j;
}

std::optional<Transaction> Transaction::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        Transaction t;
        t.txId = j.at("txId").get<std::string>();
        auto cert = Certificate::fromJson(j.at("creatorCert"));
        if (!cert) return std::nullopt;
        t.creatorCert = *cert;
        t.contractOp = j.at("contractOp").get<std::string>();
        for (const auto& a : j.at("args")) {
            auto raw = canon::fromB64(a.get<std::string>());
            if (!raw) return std::nullopt;
            t.args.push_back(std::move(*raw));
        }
        auto ts = canon::parseTimeMs(j.at("clientTimestamp").get<std::string>());
        if (!ts) return std::nullopt;
        t.clientTimestampMs = *ts;
        auto rs = readSetFromJson(j.at("readSet"));
        auto ws = writeSetFromJson(j.at("writeSet"));
        if (!rs || !ws) return std::nullopt;
        t.readSet = std::move(*rs);
        t.writeSet = std::move(*ws);
        auto rp = canon::fromB64(j.at("resultPayload").get<std::string>());
        if (!rp) return std::nullopt;
        t.resultPayload = std::move(*rp);
        for (const auto& e : j.at("endorsements")) {
            auto ec = Certificate::fromJson(e.at("endorserCert"));
            auto sig = canon::fromB64(e.at("signature").get<std::string>());
            if (!ec || !sig) return std::nullopt;
            t.endorsements.push_back(Endorsement{*ec, std::move(*sig)});
        }
        return t;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Bytes Transaction::endorsedBytes() const {
    Json j;
    j["txId"] = txId;
    j["readSet"] = readSetToJson(readSet);
    j["writeSet"] = writeSetToJson(writeSet);
    j["resultPayload"] = canon::b64(resultPayload);
    return canon::dumpBytes(j);
}

std::string validationCodeToString(ValidationCode c) {
    switch (c) {
        case ValidationCode::VALID: return "VALID";
        case ValidationCode::MVCC_CONFLICT: return "MVCC_CONFLICT";
        case ValidationCode::ENDORSEMENT_POLICY_FAILURE: return "ENDORSEMENT_POLICY_FAILURE";
        case ValidationCode::BAD_SIGNATURE: return "BAD_SIGNATURE";
        case ValidationCode::DUPLICATE_TXID: return "DUPLICATE_TXID";
        case ValidationCode::ACCESS_DENIED: return "ACCESS_DENIED";
    }
    return "VALID";
}

std::optional<ValidationCode> validationCodeFromString(const std::string& s) {
    if (s == "VALID") return ValidationCode::VALID;
    if (s == "MVCC_CONFLICT") return ValidationCode::MVCC_CONFLICT;
    if (s == "ENDORSEMENT_POLICY_FAILURE") return ValidationCode::ENDORSEMENT_POLICY_FAILURE;
    if (s == "BAD_SIGNATURE") return ValidationCode::BAD_SIGNATURE;
    if (s == "DUPLICATE_TXID") return ValidationCode::DUPLICATE_TXID;
    if (s == "ACCESS_DENIED") return ValidationCode::ACCESS_DENIED;
    return std::nullopt;
}

Json Block::toJson() const {
    Json j;
    j["number"] = number;
    j["prevHash"] = canon::b64(prevHash);
    j["dataHash"] = canon::b64(dataHash);
    Json txs = Json::array();
    for (const auto& t : transactions) txs.push_back(t.toJson());
    j["transactions"] = std::move(txs);
    Json codes = Json::array();
    for (auto c : commitMetadata) codes.push_back(validationCodeToString(c));
    j["commitMetadata"] = std::move(codes);
    return j;
}

std::optional<Block> Block::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        Block b;
        b.number = j.at("number").get<std::int64_t>();
        auto prev = canon::fromB64(j.at("prevHash").get<std::string>());
        auto data = canon::fromB64(j.at("dataHash").get<std::string>());
        if (!prev || !data) return std::nullopt;
        b.prevHash = std::move(*prev);
        b.dataHash = std::move(*data);
        for (const auto& t : j.at("transactions")) {
            auto tx = Transaction::fromJson(t);
            if (!tx) return std::nullopt;
            b.transactions.push_back(std::move(*tx));
        }
        for (const auto& c : j.at("commitMetadata")) {
            auto code = validationCodeFromString(c.get<std::string>());
            if (!code) return std::nullopt;
            b.commitMetadata.push_back(*code);
        }
        return b;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Bytes Block::computeDataHash(const std::vector<Transaction>& txs) {
    Json arr = Json::array();
    for (const auto& t : txs) arr.push_back(t.toJson());
    auto h = crypto::sha256(canon::dumpBytes(arr));
    return Bytes(h.begin(), h.end());
}

Block Block::makeGenesis() {
    Block b;
    b.number = 0;
    b.prevHash.assign(crypto::kHashSize, 0);
    b.dataHash = computeDataHash({});
    return b;
}

Bytes computeBlockHash(const Block& b) {
    Json header;
    header["number"] = b.number;
    header["prevHash"] = canon::b64(b.prevHash);
    header["dataHash"] = canon::b64(b.dataHash);
    auto h = crypto::sha256(canon::dumpBytes(header));
    return Bytes(h.begin(), h.end());
}

std::optional<BlockStore> BlockStore::open(const std::string& path) {
    BlockStore store;
    store.path_ = path;
    std::ifstream in(path, std::ios::binary);
    if (!in) return store;  // fresh file, created on first append
    for (;;) {
        unsigned char lenBuf[4];
        in.read(reinterpret_cast<char*>(lenBuf), 4);
        if (in.gcount() == 0) break;
        if (in.gcount() != 4) break;  // torn write, drop the tail
        std::uint32_t len = (std::uint32_t(lenBuf[0]) << 24) | (std::uint32_t(lenBuf[1]) << 16) |
                            (std::uint32_t(lenBuf[2]) << 8) | std::uint32_t(lenBuf[3]);
        std::string payload(len, '\0');
        in.read(payload.data(), len);
        if (static_cast<std::uint32_t>(in.gcount()) != len) break;
        auto j = canon::parse(payload);
        if (!j) return std::nullopt;
        auto b = Block::fromJson(*j);
        if (!b) return std::nullopt;
        std::string held = store.path_;
        store.path_.clear();  // loading must not rewrite the file
        AppendError err = store.append(std::move(*b));
        store.path_ = held;
        if (err != AppendError::Ok) return std::nullopt;
    }
    return store;
}

AppendError BlockStore::append(Block b) {
    if (b.number != height()) return AppendError::HeightMismatch;
    if (blocks_.empty()) {
        if (b.prevHash != Bytes(crypto::kHashSize, 0)) return AppendError::PrevHashMismatch;
    } else if (b.prevHash != computeBlockHash(blocks_.back())) {
        return AppendError::PrevHashMismatch;
    }
    if (!path_.empty() && !persist(b)) return AppendError::HeightMismatch;
    blocks_.push_back(std::move(b));
    return AppendError::Ok;
}

bool BlockStore::persist(const Block& b) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) return false;
    std::string payload = canon::dump(b.toJson());
    std::uint32_t len = static_cast<std::uint32_t>(payload.size());
    unsigned char lenBuf[4] = {static_cast<unsigned char>(len >> 24),
                               static_cast<unsigned char>(len >> 16),
                               static_cast<unsigned char>(len >> 8),
                               static_cast<unsigned char>(len)};
    out.write(reinterpret_cast<const char*>(lenBuf), 4);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    return static_cast<bool>(out);
}

Bytes BlockStore::headHash() const {
    if (blocks_.empty()) return Bytes(crypto::kHashSize, 0);
    return computeBlockHash(blocks_.back());
}

std::optional<std::int64_t> BlockStore::verifyChain() const {
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const Block& b = blocks_[i];
        if (b.number != static_cast<std::int64_t>(i)) return b.number;
        if (b.dataHash != Block::computeDataHash(b.transactions))
            return static_cast<std::int64_t>(i);
        Bytes expectedPrev = i == 0 ? Bytes(crypto::kHashSize, 0)
                                    : computeBlockHash(blocks_[i - 1]);
        if (b.prevHash != expectedPrev) return static_cast<std::int64_t>(i);
    }
    return std::nullopt;
}

const StateEntry* WorldState::get(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

void WorldState::applyWriteSet(const std::vector<WriteEntry>& ws, Version version) {
    for (const auto& w : ws) {
        if (w.value)
            entries_[w.key] = StateEntry{*w.value, version};
        else
            entries_.erase(w.key);
    }
}

std::vector<std::pair<std::string, StateEntry>> WorldState::scanPrefix(
        const std::string& prefix) const {
    std::vector<std::pair<std::string, StateEntry>> out;
    for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        out.emplace_back(it->first, it->second);
    }
    return out;
}

std::string WorldState::contentHash() const { return crypto::sha256Hex(canon::dumpBytes(toJson())); }

Json WorldState::toJson() const {
    Json j = Json::object();
    for (const auto& [key, entry] : entries_) {
        j[key] = Json{{"value", canon::b64(entry.value)}, {"version", entry.version.toJson()}};
    }
    return j;
}

std::optional<WorldState> WorldState::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    WorldState ws;
    try {
        for (const auto& [key, entry] : j.items()) {
            auto value = canon::fromB64(entry.at("value").get<std::string>());
            auto version = Version::fromJson(entry.at("version"));
            if (!value || !version) return std::nullopt;
            ws.entries_[key] = StateEntry{std::move(*value), *version};
        }
    } catch (const Json::exception&) {
        return std::nullopt;
    }
    return ws;
}

} // namespace iotbc
