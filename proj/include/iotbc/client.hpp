#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iotbc/canon.hpp"
#include "iotbc/identity.hpp"
#include "iotbc/net.hpp"

namespace iotbc {

// Outcome of a submitted transaction, whether it made it onto the chain
// or died earlier. `code` is the validation code for committed txs,
// "SIMULATION_ERROR" when endorsement simulation failed, or empty when
// the failure was transport-level (`error` then says why).
struct SubmitResult {
    std::string txId;
    std::string code;
    std::string errorCode;  // contract error code when code == "SIMULATION_ERROR"
    Bytes result;           // raw contract payload from simulation, if any
    Json value;             // the payload's "result" member, when present
    std::int64_t blockNumber = -1;
    std::string error;  // transport or peer error code when not committed

    bool valid() const { return code == "VALID"; }
};

struct EvalResult {
    bool ok = false;        // contract-level success
    Bytes result;           // raw contract payload, success or error
    Json value;             // the payload's "result" member, when present
    std::string errorCode;  // the payload's error code, when not ok
    std::string error;  // transport or peer error code; empty when the call ran
};

// One peer connection speaking the gateway protocol on behalf of one
// identity. Safe for concurrent calls; async completions run on the
// connection's reader thread, so keep them short.
class GatewayClient {
public:
    GatewayClient(std::string host, int port, Identity identity);

    bool connected() const { return mux_ && mux_->alive(); }
    const Identity& identity() const { return identity_; }

    // 32 hex chars from the system RNG.
    static std::string makeTxId();

    EvalResult evaluate(const std::string& op, const std::vector<std::string>& args,
                        int timeoutMs = 8000);
    SubmitResult submit(const std::string& op, const std::vector<std::string>& args,
                        int timeoutMs = 30000);

    // Async variants never time out client-side: the peer always answers
    // (its janitor converts lost commits into timeout errors) and a dead
    // connection fails every pending call.
    void evaluateAsync(const std::string& op, const std::vector<std::string>& args,
                       std::function<void(EvalResult)> done);
    void submitAsync(const std::string& op, const std::vector<std::string>& args,
                     int timeoutMs, std::function<void(SubmitResult)> done);

    // filter: {} for everything, {organizationId, deviceId} for one
    // device's services, {requesterId} for one requester's responses.
    // from resumes after cursor (block, tx). Events arrive on the reader
    // thread. Returns false if the subscription was refused.
    bool subscribe(const Json& filter, std::optional<std::pair<std::int64_t, std::int64_t>> from,
                   std::function<void(const Json&)> onEvent);

    std::optional<Json> stats(int timeoutMs = 5000);

    void close();

private:
    Identity identity_;
    std::shared_ptr<net::MuxClient> mux_;

    Json proposalPayload(const std::string& op, const std::vector<std::string>& args) const;
    static SubmitResult submitResultFrom(const std::optional<net::Envelope>& resp);
    static EvalResult evalResultFrom(const std::optional<net::Envelope>& resp);
};

// Blob-service client calls, one shot each.
std::optional<std::string> auxPut(const std::string& host, int port, const Bytes& data,
                                  std::string* error = nullptr);
std::optional<Bytes> auxGet(const std::string& host, int port, const std::string& uri,
                            std::string* error = nullptr);

} // namespace iotbc
