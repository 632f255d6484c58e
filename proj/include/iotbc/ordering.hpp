#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iotbc/canon.hpp"

namespace iotbc {

struct BatchConfig {
    std::int64_t maxMessageCount = 10;        // messages per block ceiling
    std::int64_t preferredMaxBytes = 512 * 1024;
    std::int64_t absoluteMaxBytes = 10 * 1024 * 1024;
    std::int64_t batchTimeoutMs = 2000;

    bool valid() const {
        return maxMessageCount >= 1 && preferredMaxBytes >= 1 &&
               absoluteMaxBytes >= preferredMaxBytes && batchTimeoutMs > 0;
    }

    Json toJson() const;
    static std::optional<BatchConfig> fromJson(const Json& j);
};

// Groups submitted envelopes into batches. Single-threaded: the ordering
// node serializes enqueue and timeout events.
class BatchCutter {
public:
    explicit BatchCutter(BatchConfig cfg) : cfg_(cfg) {}

    struct EnqueueResult {
        bool rejected = false;  // envelope exceeded absoluteMaxBytes
        std::vector<std::vector<Bytes>> cuts;
    };

    // Cutting rules, applied in order: reject over the absolute cap; an
    // envelope over preferredMaxBytes flushes the pending batch and ships
    // alone; an envelope that would push pending over preferredMaxBytes
    // flushes pending first; then append, and a full batch (count cap)
    // ships at once. The batch timer starts when a message enters an
    // empty batch.
    EnqueueResult enqueue(Bytes envelope, std::int64_t nowMs);

    // Cuts the pending batch once its deadline has passed.
    std::optional<std::vector<Bytes>> onTimeout(std::int64_t nowMs);

    std::optional<std::int64_t> timerDeadline() const { return deadline_; }
    std::size_t pendingCount() const { return pending_.size(); }
    std::int64_t pendingBytes() const { return pendingBytes_; }
    const BatchConfig& config() const { return cfg_; }

private:
    BatchConfig cfg_;
    std::vector<Bytes> pending_;
    std::int64_t pendingBytes_ = 0;
    std::optional<std::int64_t> deadline_;

    std::vector<Bytes> cutPending();
};

} // namespace iotbc
