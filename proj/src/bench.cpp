#include "iotbc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "iotbc/client.hpp"
#include "iotbc/orchestrator.hpp"

namespace iotbc::bench {

namespace {

const char* kReadOps[] = {"get_device",  "get_all_devices",  "get_service",
                          "get_all_services", "get_request", "get_all_requests"};
const char* kTxOps[] = {"register_service", "deregister_service", "request_service",
                        "respond_to_request", "remove_request"};

std::int64_t steadyUs() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

} // namespace

bool isReadOperation(const std::string& op) {
    for (const auto* r : kReadOps)
        if (op == r) return true;
    return false;
}

bool isBenchOperation(const std::string& op) {
    if (isReadOperation(op)) return true;
    for (const auto* t : kTxOps)
        if (op == t) return true;
    return false;
}

Json WorkloadSpec::toJson() const {
    return Json{{"name", name},
                {"operation", operation},
                {"totalOps", totalOps},
                {"fixedLoad", fixedLoad},
                {"workerCount", workerCount},
                {"connectionsPerWorker", connectionsPerWorker},
                {"payloadBytes", payloadBytes},
                {"errorCeiling", errorCeiling},
                {"submitTimeoutMs", submitTimeoutMs},
                {"resourcePeriodMs", resourcePeriodMs},
                {"sampleResources", sampleResources}};
}

std::optional<WorkloadSpec> WorkloadSpec::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        WorkloadSpec s;
        s.operation = j.at("operation").get<std::string>();
        s.name = j.value("name", s.operation);
        s.totalOps = j.value("totalOps", s.totalOps);
        s.fixedLoad = j.value("fixedLoad", s.fixedLoad);
        s.workerCount = j.value("workerCount", s.workerCount);
        s.connectionsPerWorker = j.value("connectionsPerWorker", s.connectionsPerWorker);
        s.payloadBytes = j.value("payloadBytes", s.payloadBytes);
        s.errorCeiling = j.value("errorCeiling", s.errorCeiling);
        s.submitTimeoutMs = j.value("submitTimeoutMs", s.submitTimeoutMs);
        s.resourcePeriodMs = j.value("resourcePeriodMs", s.resourcePeriodMs);
        s.sampleResources = j.value("sampleResources", s.sampleResources);
        return s;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

std::string WorkloadSpec::validate() const {
    if (!isBenchOperation(operation)) return "unknown operation: " + operation;
    if (fixedLoad < 1) return "fixedLoad must be >= 1";
    if (totalOps < fixedLoad) return "totalOps must be >= fixedLoad";
    if (workerCount < 1) return "workerCount must be >= 1";
    if (connectionsPerWorker < 1) return "connectionsPerWorker must be >= 1";
    if (payloadBytes < 0) return "payloadBytes must be >= 0";
    if (errorCeiling < 0 || errorCeiling > 1) return "errorCeiling must be in [0,1]";
    if (submitTimeoutMs < 1000) return "submitTimeoutMs must be >= 1000";
    if (resourcePeriodMs < 100) return "resourcePeriodMs must be >= 100";
    return "";
}

Json ResourceSample::toJson() const {
    return Json{{"timeMs", timeMs},
                {"ok", ok},
                {"cpuTicks", cpuTicks},
                {"ticksPerSecond", ticksPerSecond},
                {"memBytes", memBytes},
                {"netInBytes", netInBytes},
                {"netOutBytes", netOutBytes},
                {"diskReadBytes", diskReadBytes},
                {"diskWriteBytes", diskWriteBytes}};
}

std::optional<ResourceSample> ResourceSample::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        ResourceSample s;
        s.timeMs = j.at("timeMs").get<std::int64_t>();
        s.ok = j.at("ok").get<bool>();
        s.cpuTicks = j.value("cpuTicks", std::int64_t{0});
        s.ticksPerSecond = j.value("ticksPerSecond", std::int64_t{0});
        s.memBytes = j.value("memBytes", std::int64_t{0});
        s.netInBytes = j.value("netInBytes", std::int64_t{0});
        s.netOutBytes = j.value("netOutBytes", std::int64_t{0});
        s.diskReadBytes = j.value("diskReadBytes", std::int64_t{0});
        s.diskWriteBytes = j.value("diskWriteBytes", std::int64_t{0});
        return s;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Json NodeSeries::toJson() const {
    Json arr = Json::array();
    for (const auto& s : samples) arr.push_back(s.toJson());
    return Json{{"node", node}, {"samples", std::move(arr)}};
}

std::optional<NodeSeries> NodeSeries::fromJson(const Json& j) {
    if (!j.is_object() || !j.value("samples", Json()).is_array()) return std::nullopt;
    NodeSeries n;
    n.node = j.value("node", "");
    for (const auto& s : j["samples"]) {
        auto parsed = ResourceSample::fromJson(s);
        if (!parsed) return std::nullopt;
        n.samples.push_back(std::move(*parsed));
    }
    return n;
}

Json Metrics::toJson() const {
    Json errs = Json::object();
    for (const auto& [code, count] : errorCounts) errs[code] = count;
    return Json{{"nRead", nRead},
                {"tReadSec", tReadSec},
                {"wRead", wRead},
                {"meanLRead", meanLRead},
                {"medianLRead", medianLRead},
                {"p95LRead", p95LRead},
                {"nTx", nTx},
                {"tTxSec", tTxSec},
                {"wTx", wTx},
                {"meanLTx", meanLTx},
                {"medianLTx", medianLTx},
                {"p95LTx", p95LTx},
                {"dispatched", dispatched},
                {"failed", failed},
                {"errorCounts", std::move(errs)}};
}

std::optional<Metrics> Metrics::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        Metrics m;
        m.nRead = j.at("nRead").get<std::int64_t>();
        m.tReadSec = j.at("tReadSec").get<double>();
        m.wRead = j.at("wRead").get<double>();
        m.meanLRead = j.at("meanLRead").get<double>();
        m.medianLRead = j.at("medianLRead").get<double>();
        m.p95LRead = j.at("p95LRead").get<double>();
        m.nTx = j.at("nTx").get<std::int64_t>();
        m.tTxSec = j.at("tTxSec").get<double>();
        m.wTx = j.at("wTx").get<double>();
        m.meanLTx = j.at("meanLTx").get<double>();
        m.medianLTx = j.at("medianLTx").get<double>();
        m.p95LTx = j.at("p95LTx").get<double>();
        m.dispatched = j.at("dispatched").get<std::int64_t>();
        m.failed = j.at("failed").get<std::int64_t>();
        for (const auto& [code, count] : j.at("errorCounts").items())
            m.errorCounts[code] = count.get<std::int64_t>();
        return m;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

namespace {

struct LatencyStats {
    double mean = 0, median = 0, p95 = 0;
};

LatencyStats latencyStats(std::vector<double> lat) {
    LatencyStats s;
    if (lat.empty()) return s;
    std::sort(lat.begin(), lat.end());
    double sum = 0;
    for (double v : lat) sum += v;
    s.mean = sum / double(lat.size());
    auto n = lat.size();
    s.median = n % 2 ? lat[n / 2] : (lat[n / 2 - 1] + lat[n / 2]) / 2.0;
    // Nearest-rank: smallest value with at least 95% of samples at or
    // below it.
    auto rank = static_cast<std::size_t>(std::ceil(0.95 * double(n)));
    s.p95 = lat[rank - 1];
    return s;
}

} // namespace

std::optional<Metrics> computeMetrics(const std::vector<LatencySample>& samples) {
    if (samples.empty()) return std::nullopt;
    Metrics m;
    m.dispatched = static_cast<std::int64_t>(samples.size());

    std::vector<double> readLat, txLat;
    std::int64_t readFirst = 0, readLast = 0, txFirst = 0, txLast = 0;
    for (const auto& s : samples) {
        if (!s.succeeded()) {
            ++m.failed;
            ++m.errorCounts[s.code.empty() ? "unknown" : s.code];
            continue;
        }
        if (s.isRead) {
            if (readLat.empty() || s.submitUs < readFirst) readFirst = s.submitUs;
            if (readLat.empty() || s.completeUs > readLast) readLast = s.completeUs;
            readLat.push_back(s.latencySec());
        } else {
            if (txLat.empty() || s.submitUs < txFirst) txFirst = s.submitUs;
            if (txLat.empty() || s.completeUs > txLast) txLast = s.completeUs;
            txLat.push_back(s.latencySec());
        }
    }

    m.nRead = static_cast<std::int64_t>(readLat.size());
    m.nTx = static_cast<std::int64_t>(txLat.size());
    if (m.nRead > 0) {
        m.tReadSec = double(readLast - readFirst) / 1e6;
        m.wRead = m.tReadSec > 0 ? double(m.nRead) / m.tReadSec : 0;
        auto s = latencyStats(std::move(readLat));
        m.meanLRead = s.mean;
        m.medianLRead = s.median;
        m.p95LRead = s.p95;
    }
    if (m.nTx > 0) {
        m.tTxSec = double(txLast - txFirst) / 1e6;
        m.wTx = m.tTxSec > 0 ? double(m.nTx) / m.tTxSec : 0;
        auto s = latencyStats(std::move(txLat));
        m.meanLTx = s.mean;
        m.medianLTx = s.median;
        m.p95LTx = s.p95;
    }
    return m;
}

Json RunResult::toJson() const {
    Json res = Json::array();
    for (const auto& n : resources) res.push_back(n.toJson());
    return Json{{"spec", spec.toJson()},
                {"metrics", metrics.toJson()},
                {"resources", std::move(res)},
                {"maxInFlight", maxInFlight},
                {"aborted", aborted},
                {"abortReason", abortReason}};
}

std::optional<RunResult> RunResult::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    auto spec = WorkloadSpec::fromJson(j.value("spec", Json()));
    auto metrics = Metrics::fromJson(j.value("metrics", Json()));
    if (!spec || !metrics || !j.value("resources", Json()).is_array()) return std::nullopt;
    RunResult r;
    r.spec = std::move(*spec);
    r.metrics = std::move(*metrics);
    for (const auto& n : j["resources"]) {
        auto series = NodeSeries::fromJson(n);
        if (!series) return std::nullopt;
        r.resources.push_back(std::move(*series));
    }
    r.maxInFlight = j.value("maxInFlight", std::int64_t{0});
    r.aborted = j.value("aborted", false);
    r.abortReason = j.value("abortReason", "");
    return r;
}

namespace {

struct WorkerPlan {
    std::string org;
    Identity identity;
    std::string deviceId;
    std::int64_t quota = 0;
    std::vector<std::unique_ptr<GatewayClient>> clients;
};

std::string filler(std::int64_t bytes) { return std::string(std::size_t(bytes), 'x'); }

Json requestBody(const WorkerPlan& w, const std::string& id, std::int64_t payloadBytes) {
    return Json{{"id", id},
                {"time", canon::formatTimeMs(canon::nowMs())},
                {"service",
                 Json{{"name", "bench-svc"}, {"deviceId", w.deviceId}, {"organizationId", w.org}}},
                {"method", "invoke"},
                {"arguments", Json::array({filler(payloadBytes)})}};
}

Json responseBody(const std::string& requestId, std::int64_t payloadBytes) {
    return Json{{"requestId", requestId},
                {"time", canon::formatTimeMs(canon::nowMs())},
                {"statusCode", 200},
                {"returnValue", canon::b64(canon::stringToBytes(filler(payloadBytes)))}};
}

// Every op a worker issues, seed or timed, in one shape.
struct OpCall {
    std::string op;
    std::vector<std::string> args;
    bool isRead = false;
};

OpCall timedCall(const WorkloadSpec& spec, const WorkerPlan& w, std::int64_t j) {
    const auto& op = spec.operation;
    std::string uniq = "w" + w.deviceId.substr(0, 8) + "-" + std::to_string(j);
    if (op == "get_device") return {op, {w.org, w.deviceId}, true};
    if (op == "get_all_devices") return {op, {w.org}, true};
    if (op == "get_service") return {op, {w.org, w.deviceId, "bench-svc"}, true};
    if (op == "get_all_services") return {op, {w.org}, true};
    if (op == "get_request") return {op, {"seed-" + w.deviceId.substr(0, 8)}, true};
    if (op == "get_all_requests") return {op, {w.org, w.deviceId}, true};
    if (op == "register_service")
        return {op, {"svc-" + uniq, "1", filler(spec.payloadBytes)}, false};
    if (op == "deregister_service") return {op, {"del-" + uniq}, false};
    if (op == "request_service")
        return {op, {canon::dump(requestBody(w, "req-" + uniq, spec.payloadBytes))}, false};
    if (op == "respond_to_request")
        return {op, {canon::dump(responseBody("rsp-" + uniq, spec.payloadBytes))}, false};
    return {op, {"rm-" + uniq}, false};  // remove_request
}

// Seeds run in three dependency stages, because a worker's ops within a
// stage dispatch concurrently: devices commit before services, services
// before requests.
constexpr int kSeedStages = 3;

std::vector<OpCall> seedStage(const WorkloadSpec& spec, const WorkerPlan& w, int stage) {
    const auto& op = spec.operation;
    std::string uniq8 = w.deviceId.substr(0, 8);
    std::vector<OpCall> seeds;
    if (stage == 0) {
        seeds.push_back({"register_device", {"bench-" + uniq8, "bench device"}, false});
        return seeds;
    }
    if (stage == 1) {
        if (op != "get_device" && op != "get_all_devices")
            seeds.push_back({"register_service", {"bench-svc", "1", "bench target service"}, false});
        if (op == "deregister_service")
            for (std::int64_t j = 0; j < w.quota; ++j)
                seeds.push_back({"register_service",
                                 {"del-w" + uniq8 + "-" + std::to_string(j), "1", "to be removed"},
                                 false});
        return seeds;
    }
    if (op == "get_request") {
        seeds.push_back(
            {"request_service", {canon::dump(requestBody(w, "seed-" + uniq8, spec.payloadBytes))}, false});
    } else if (op == "get_all_requests") {
        for (int k = 0; k < 10; ++k)
            seeds.push_back({"request_service",
                             {canon::dump(requestBody(w, "seedall-" + uniq8 + "-" + std::to_string(k),
                                                      spec.payloadBytes))},
                             false});
    } else if (op == "respond_to_request") {
        for (std::int64_t j = 0; j < w.quota; ++j)
            seeds.push_back({"request_service",
                             {canon::dump(requestBody(w, "rsp-w" + uniq8 + "-" + std::to_string(j),
                                                      spec.payloadBytes))},
                             false});
    } else if (op == "remove_request") {
        for (std::int64_t j = 0; j < w.quota; ++j)
            seeds.push_back({"request_service",
                             {canon::dump(requestBody(w, "rm-w" + uniq8 + "-" + std::to_string(j),
                                                      spec.payloadBytes))},
                             false});
    }
    return seeds;
}

// Dispatches calls under the controller; samples land in out[base + j].
// Returns when every callback has fired.
void drive(const WorkloadSpec& spec, std::vector<WorkerPlan>& workers,
           const std::vector<std::vector<OpCall>>& perWorkerCalls, FixedLoadController& ctrl,
           std::vector<LatencySample>* out) {
    std::vector<std::int64_t> bases(workers.size(), 0);
    if (out) {
        std::int64_t total = 0;
        for (std::size_t w = 0; w < workers.size(); ++w) {
            bases[w] = total;
            total += static_cast<std::int64_t>(perWorkerCalls[w].size());
        }
        out->assign(std::size_t(total), LatencySample{});
    }

    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers.size(); ++w) {
        threads.emplace_back([&, w] {
            auto& plan = workers[w];
            const auto& calls = perWorkerCalls[w];
            for (std::size_t j = 0; j < calls.size(); ++j) {
                if (!ctrl.acquire()) break;
                const auto& call = calls[j];
                auto& client = *plan.clients[j % plan.clients.size()];
                std::int64_t t0 = steadyUs();
                LatencySample* slot = out ? &(*out)[std::size_t(bases[w]) + j] : nullptr;
                if (call.isRead) {
                    client.evaluateAsync(call.op, call.args, [&ctrl, slot, t0](EvalResult r) {
                        std::string code = r.ok ? "OK"
                                                : (!r.error.empty()      ? r.error
                                                   : !r.errorCode.empty() ? r.errorCode
                                                                          : "EVAL_FAILED");
                        if (slot) *slot = {t0, steadyUs(), code, true};
                        ctrl.release(code != "OK");
                    });
                } else {
                    client.submitAsync(call.op, call.args, int(spec.submitTimeoutMs),
                                       [&ctrl, slot, t0](SubmitResult r) {
                                           std::string code = !r.code.empty() ? r.code : r.error;
                                           if (code == "SIMULATION_ERROR" && !r.errorCode.empty())
                                               code = r.errorCode;
                                           if (slot) *slot = {t0, steadyUs(), code, false};
                                           ctrl.release(code != "VALID");
                                       });
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    ctrl.waitIdle();
}

class ResourceSampler {
public:
    ResourceSampler(const TopologyConfig& topo, std::int64_t periodMs) : periodMs_(periodMs) {
        for (int i = 0; i < topo.ordering.nodes; ++i)
            nodes_.push_back({TopologyConfig::ordererName(i), topo.ordererPort(i)});
        for (std::size_t o = 0; o < topo.orgs.size(); ++o)
            for (int p = 0; p < topo.orgs[o].peers; ++p)
                nodes_.push_back(
                    {TopologyConfig::peerName(topo.orgs[o].name, p), topo.peerPort(o, p)});
        nodes_.push_back({"aux", topo.auxPort});
        series_.resize(nodes_.size());
        for (std::size_t i = 0; i < nodes_.size(); ++i) series_[i].node = nodes_[i].first;
    }

    void start() {
        running_ = true;
        thread_ = std::thread([this] { loop(); });
    }

    std::vector<NodeSeries> stop() {
        running_ = false;
        if (thread_.joinable()) thread_.join();
        links_.clear();
        return std::move(series_);
    }

private:
    void loop() {
        links_.resize(nodes_.size());
        while (running_) {
            auto tickStart = std::chrono::steady_clock::now();
            for (std::size_t i = 0; i < nodes_.size() && running_; ++i) {
                ResourceSample s;
                s.timeMs = canon::nowMs();
                if (!links_[i] || !links_[i]->alive())
                    links_[i] = net::MuxClient::dial("127.0.0.1", nodes_[i].second);
                if (links_[i]) {
                    net::Envelope e;
                    e.type = "Stats";
                    auto resp = links_[i]->call(std::move(e), 2000);
                    if (resp && resp->type == "Ack") {
                        s.ok = true;
                        s.cpuTicks = resp->payload.value("cpuTicks", std::int64_t{0});
                        s.ticksPerSecond = resp->payload.value("ticksPerSecond", std::int64_t{0});
                        s.memBytes = resp->payload.value("memBytes", std::int64_t{0});
                        s.netInBytes = resp->payload.value("netInBytes", std::int64_t{0});
                        s.netOutBytes = resp->payload.value("netOutBytes", std::int64_t{0});
                        s.diskReadBytes = resp->payload.value("diskReadBytes", std::int64_t{0});
                        s.diskWriteBytes = resp->payload.value("diskWriteBytes", std::int64_t{0});
                    }
                }
                series_[i].samples.push_back(s);
            }
            std::this_thread::sleep_until(tickStart + std::chrono::milliseconds(periodMs_));
        }
    }

    std::int64_t periodMs_;
    std::vector<std::pair<std::string, int>> nodes_;
    std::vector<NodeSeries> series_;
    std::vector<std::shared_ptr<net::MuxClient>> links_;
    std::atomic<bool> running_{false};
    std::thread thread_;
};

} // namespace

std::optional<RunResult> runWorkload(const WorkloadSpec& spec, const TopologyConfig& topo,
                                     std::string& error) {
    if (auto err = spec.validate(); !err.empty()) {
        error = err;
        return std::nullopt;
    }
    if (auto err = topo.validate(); !err.empty()) {
        error = err;
        return std::nullopt;
    }

    // One identity per worker so every worker owns its device and the
    // ops it seeds; connections spread over all peers.
    std::vector<std::pair<std::size_t, int>> peers;
    for (std::size_t o = 0; o < topo.orgs.size(); ++o)
        for (int p = 0; p < topo.orgs[o].peers; ++p) peers.emplace_back(o, p);

    std::vector<WorkerPlan> workers(std::size_t(spec.workerCount));
    std::int64_t perWorker = spec.totalOps / spec.workerCount;
    std::int64_t remainder = spec.totalOps % spec.workerCount;
    int conn = 0;
    for (std::size_t w = 0; w < workers.size(); ++w) {
        auto& plan = workers[w];
        plan.org = topo.orgs[w % topo.orgs.size()].name;
        std::string err;
        auto id = issueIdentity(topo, plan.org, "bench-worker-" + std::to_string(w), Role::Writer,
                                err);
        if (!id) {
            error = "cannot issue bench identity: " + err;
            return std::nullopt;
        }
        plan.identity = std::move(*id);
        plan.deviceId = deriveDeviceId(plan.identity.certificate);
        plan.quota = perWorker + (std::int64_t(w) < remainder ? 1 : 0);
        for (int c = 0; c < spec.connectionsPerWorker; ++c, ++conn) {
            auto [o, p] = peers[conn % peers.size()];
            auto client = std::make_unique<GatewayClient>("127.0.0.1", topo.peerPort(o, p),
                                                          plan.identity);
            if (!client->connected()) {
                error = "cannot reach peer on port " + std::to_string(topo.peerPort(o, p));
                return std::nullopt;
            }
            plan.clients.push_back(std::move(client));
        }
    }

    // Seeding: same driver, no timing, no failure budget (any seed
    // failure aborts the run).
    for (int stage = 0; stage < kSeedStages; ++stage) {
        std::vector<std::vector<OpCall>> seedPlan;
        std::int64_t seedCount = 0;
        for (auto& w : workers) {
            seedPlan.push_back(seedStage(spec, w, stage));
            seedCount += std::int64_t(seedPlan.back().size());
        }
        if (seedCount == 0) continue;
        FixedLoadController seedCtrl(spec.fixedLoad, 0);
        std::vector<LatencySample> seedSamples;
        drive(spec, workers, seedPlan, seedCtrl, &seedSamples);
        for (const auto& s : seedSamples) {
            bool fired = s.submitUs != 0 || s.completeUs != 0;
            if (fired && !s.succeeded()) {
                error = "seeding failed: " + s.code;
                return std::nullopt;
            }
        }
        if (seedCtrl.aborted()) {
            error = "seeding aborted";
            return std::nullopt;
        }
    }

    std::vector<std::vector<OpCall>> timedPlan(workers.size());
    for (std::size_t w = 0; w < workers.size(); ++w) {
        timedPlan[w].reserve(std::size_t(workers[w].quota));
        for (std::int64_t j = 0; j < workers[w].quota; ++j)
            timedPlan[w].push_back(timedCall(spec, workers[w], j));
    }

    ResourceSampler sampler(topo, spec.resourcePeriodMs);
    if (spec.sampleResources) sampler.start();

    auto failureLimit = std::int64_t(spec.errorCeiling * double(spec.totalOps));
    FixedLoadController ctrl(spec.fixedLoad, failureLimit);
    std::vector<LatencySample> samples;
    drive(spec, workers, timedPlan, ctrl, &samples);

    RunResult result;
    result.spec = spec;
    if (spec.sampleResources) result.resources = sampler.stop();
    result.maxInFlight = ctrl.maxObserved();
    result.aborted = ctrl.aborted();
    if (result.aborted)
        result.abortReason = "error ceiling exceeded: " + std::to_string(ctrl.failures()) +
                             " failures over " + std::to_string(spec.totalOps) + " ops";

    // An aborted run leaves unfired slots; drop the never-dispatched.
    std::vector<LatencySample> fired;
    fired.reserve(samples.size());
    for (const auto& s : samples)
        if (s.submitUs != 0 || s.completeUs != 0) fired.push_back(s);
    auto metrics = computeMetrics(fired);
    if (!metrics) {
        error = "no operations were dispatched";
        return std::nullopt;
    }
    result.metrics = std::move(*metrics);
    return result;
}

std::string formatTable(const std::vector<RunResult>& results) {
    std::ostringstream out;
    out << std::left << std::setw(26) << "workload" << std::setw(20) << "operation"
        << std::right << std::setw(8) << "ok" << std::setw(8) << "fail" << std::setw(12)
        << "W (ops/s)" << std::setw(12) << "mean L(s)" << std::setw(12) << "median" << std::setw(12)
        << "p95" << "\n";
    out << std::string(110, '-') << "\n";
    for (const auto& r : results) {
        bool read = isReadOperation(r.spec.operation);
        const auto& m = r.metrics;
        out << std::left << std::setw(26) << r.spec.name << std::setw(20) << r.spec.operation
            << std::right << std::setw(8) << (read ? m.nRead : m.nTx) << std::setw(8) << m.failed
            << std::fixed << std::setprecision(2) << std::setw(12) << (read ? m.wRead : m.wTx)
            << std::setprecision(4) << std::setw(12) << (read ? m.meanLRead : m.meanLTx)
            << std::setw(12) << (read ? m.medianLRead : m.medianLTx) << std::setw(12)
            << (read ? m.p95LRead : m.p95LTx);
        if (r.aborted) out << "  ABORTED";
        out << "\n";
    }
    return out.str();
}

bool writeReport(const std::vector<RunResult>& results, const std::string& outDir,
                 std::string& error) {
    std::error_code ec;
    std::filesystem::create_directories(outDir, ec);
    if (ec) {
        error = "cannot create " + outDir;
        return false;
    }
    Json workloads = Json::array();
    for (const auto& r : results) workloads.push_back(r.toJson());
    if (!saveJsonFile(outDir + "/report.json", Json{{"workloads", std::move(workloads)}})) {
        error = "cannot write report.json";
        return false;
    }
    std::ofstream table(outDir + "/summary.txt", std::ios::trunc);
    if (!table) {
        error = "cannot write summary.txt";
        return false;
    }
    table << formatTable(results);
    return table.good();
}

} // namespace iotbc::bench
