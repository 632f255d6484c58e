#pragma once

#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "iotbc/canon.hpp"
#include "iotbc/topology.hpp"

namespace iotbc::bench {

// The benchmarked operations: six reads, five transaction kinds.
bool isReadOperation(const std::string& op);
bool isBenchOperation(const std::string& op);

struct WorkloadSpec {
    std::string name;       // row label in reports; defaults to operation
    std::string operation;  // one of the 11 benchmarked ops
    std::int64_t totalOps = 2000;
    std::int64_t fixedLoad = 100;
    int workerCount = 5;
    int connectionsPerWorker = 2;
    std::int64_t payloadBytes = 100;  // filler size for descriptions/arguments
    double errorCeiling = 0.10;       // abort when failures exceed this fraction
    std::int64_t submitTimeoutMs = 30000;
    std::int64_t resourcePeriodMs = 1000;
    bool sampleResources = true;

    Json toJson() const;
    static std::optional<WorkloadSpec> fromJson(const Json& j);
    // "" or the first violated invariant.
    std::string validate() const;
};

// One completed op. Times come from one steady clock; completeUs is
// t_response for reads and t_confirm for transactions.
struct LatencySample {
    std::int64_t submitUs = 0;
    std::int64_t completeUs = 0;
    std::string code;  // "OK"/"VALID" success; anything else is a failure
    bool isRead = false;

    bool succeeded() const { return code == "OK" || code == "VALID"; }
    double latencySec() const { return double(completeUs - submitUs) / 1e6; }
};

struct ResourceSample {
    std::int64_t timeMs = 0;
    bool ok = false;  // false = node unreachable at this tick (a gap)
    std::int64_t cpuTicks = 0;
    std::int64_t ticksPerSecond = 0;
    std::int64_t memBytes = 0;
    std::int64_t netInBytes = 0;
    std::int64_t netOutBytes = 0;
    std::int64_t diskReadBytes = 0;
    std::int64_t diskWriteBytes = 0;

    Json toJson() const;
    static std::optional<ResourceSample> fromJson(const Json& j);
};

struct NodeSeries {
    std::string node;
    std::vector<ResourceSample> samples;

    Json toJson() const;
    static std::optional<NodeSeries> fromJson(const Json& j);
};

// Throughput is count over the span from first dispatch to last
// completion, measured separately for reads and transactions. Only
// successful ops enter latency and throughput; failures are tallied by
// code.
struct Metrics {
    std::int64_t nRead = 0;
    double tReadSec = 0;
    double wRead = 0;
    double meanLRead = 0, medianLRead = 0, p95LRead = 0;

    std::int64_t nTx = 0;
    double tTxSec = 0;
    double wTx = 0;
    double meanLTx = 0, medianLTx = 0, p95LTx = 0;

    std::int64_t dispatched = 0;
    std::int64_t failed = 0;
    std::map<std::string, std::int64_t> errorCounts;

    Json toJson() const;
    static std::optional<Metrics> fromJson(const Json& j);
};

// Pure. nullopt on an empty sample set. Medians average the middle
// pair; p95 is nearest-rank.
std::optional<Metrics> computeMetrics(const std::vector<LatencySample>& samples);

// The one shared coordination point of a run: dispatch happens only
// below the target, and the high-water mark proves it afterwards.
class FixedLoadController {
public:
    explicit FixedLoadController(std::int64_t target, std::int64_t failureLimit)
        : target_(target), failureLimit_(failureLimit) {}

    // False when the run is aborting; true after reserving a slot.
    bool acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return abort_ || inFlight_ < target_; });
        if (abort_) return false;
        ++inFlight_;
        maxObserved_ = std::max(maxObserved_, inFlight_);
        return true;
    }

    void release(bool failed) {
        {
            std::lock_guard lock(mu_);
            --inFlight_;
            if (failed && ++failures_ > failureLimit_) abort_ = true;
        }
        cv_.notify_all();
    }

    void waitIdle() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return inFlight_ == 0; });
    }

    bool aborted() const {
        std::lock_guard lock(mu_);
        return abort_;
    }
    std::int64_t maxObserved() const {
        std::lock_guard lock(mu_);
        return maxObserved_;
    }
    std::int64_t failures() const {
        std::lock_guard lock(mu_);
        return failures_;
    }

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::int64_t target_;
    std::int64_t failureLimit_;
    std::int64_t inFlight_ = 0;
    std::int64_t maxObserved_ = 0;
    std::int64_t failures_ = 0;
    bool abort_ = false;
};

struct RunResult {
    WorkloadSpec spec;
    Metrics metrics;
    std::vector<NodeSeries> resources;
    std::int64_t maxInFlight = 0;  // instrumented; must never exceed fixedLoad
    bool aborted = false;
    std::string abortReason;

    Json toJson() const;
    static std::optional<RunResult> fromJson(const Json& j);
};

// Seeds prerequisite state (untimed), then dispatches exactly
// spec.totalOps ops under the fixed-load rule against the network in
// topo. error is set when the run could not execute at all; an aborted
// run (error ceiling) still returns its partial result.
std::optional<RunResult> runWorkload(const WorkloadSpec& spec, const TopologyConfig& topo,
                                     std::string& error);

// report.json (canonical) plus summary.txt, one table row per workload.
bool writeReport(const std::vector<RunResult>& results, const std::string& outDir,
                 std::string& error);
std::string formatTable(const std::vector<RunResult>& results);

} // namespace iotbc::bench
