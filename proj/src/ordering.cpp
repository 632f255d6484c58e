#include "iotbc/ordering.hpp"

namespace iotbc {

Json BatchConfig::toJson() const {
    return Json{{"maxMessageCount", maxMessageCount},
                {"preferredMaxBytes", preferredMaxBytes},
                {"absoluteMaxBytes", absoluteMaxBytes},
                {"batchTimeoutMs", batchTimeoutMs}};
}

std::optional<BatchConfig> BatchConfig::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    BatchConfig cfg;
    try {
        if (j.contains("maxMessageCount"))
            cfg.maxMessageCount = j["maxMessageCount"].get<std::int64_t>();
        if (j.contains("preferredMaxBytes"))
            cfg.preferredMaxBytes = j["preferredMaxBytes"].get<std::int64_t>();
        if (j.contains("absoluteMaxBytes"))
            cfg.absoluteMaxBytes = j["absoluteMaxBytes"].get<std::int64_t>();
        if (j.contains("batchTimeoutMs"))
            cfg.batchTimeoutMs = j["batchTimeoutMs"].get<std::int64_t>();
    } catch (const Json::exception&) {
        return std::nullopt;
    }
    if (!cfg.valid()) return std::nullopt;
    return cfg;
}

BatchCutter::EnqueueResult BatchCutter::enqueue(Bytes envelope, std::int64_t nowMs) {
    EnqueueResult result;
    auto size = static_cast<std::int64_t>(envelope.size());

    if (size > cfg_.absoluteMaxBytes) {
        result.rejected = true;
        return result;
    }

    if (size > cfg_.preferredMaxBytes) {
        if (!pending_.empty()) result.cuts.push_back(cutPending());
        result.cuts.push_back({std::move(envelope)});
        return result;
    }

    if (!pending_.empty() && pendingBytes_ + size > cfg_.preferredMaxBytes)
        result.cuts.push_back(cutPending());

    if (pending_.empty()) deadline_ = nowMs + cfg_.batchTimeoutMs;
    pendingBytes_ += size;
    pending_.push_back(std::move(envelope));

    if (static_cast<std::int64_t>(pending_.size()) == cfg_.maxMessageCount)
        result.cuts.push_back(cutPending());
    return result;
}

std::optional<std::vector<Bytes>> BatchCutter::onTimeout(std::int64_t nowMs) {
    if (pending_.empty() || !deadline_ || nowMs < *deadline_) return std::nullopt;
    return cutPending();
}

std::vector<Bytes> BatchCutter::cutPending() {
    std::vector<Bytes> batch = std::move(pending_);
    pending_.clear();
    pendingBytes_ = 0;
    deadline_.reset();
    return batch;
}

} // namespace iotbc
