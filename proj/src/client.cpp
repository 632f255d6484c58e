#include "iotbc/client.hpp"

#include <atomic>
#include <chrono>
#include <future>

#include "iotbc/crypto.hpp"
#include "iotbc/execution.hpp"

namespace iotbc {

GatewayClient::GatewayClient(std::string host, int port, Identity identity)
    : identity_(std::move(identity)), mux_(net::MuxClient::dial(host, port)) {}

std::string GatewayClient::makeTxId() {
    return canon::hex(crypto::randomBytes(16));
}

Json GatewayClient::proposalPayload(const std::string& op,
                                    const std::vector<std::string>& args) const {
    std::vector<Bytes> rawArgs;
    rawArgs.reserve(args.size());
    for (const auto& a : args) rawArgs.push_back(canon::stringToBytes(a));
    auto p = makeProposal(identity_, makeTxId(), op, std::move(rawArgs), canon::nowMs());
    return Json{{"proposal", p.toJson()}};
}

namespace {

// Contract payloads are {"result": ...} on success and
// {"error": {"code", "message"}} on failure.
void splitPayload(const Bytes& raw, Json& value, std::string& errorCode) {
    auto j = canon::parse(raw);
    if (!j || !j->is_object()) return;
    if (j->contains("result")) value = (*j)["result"];
    if (j->contains("error") && (*j)["error"].is_object())
        errorCode = (*j)["error"].value("code", "");
}

} // namespace

EvalResult GatewayClient::evalResultFrom(const std::optional<net::Envelope>& resp) {
    EvalResult r;
    if (!resp) {
        r.error = "transport";
        return r;
    }
    if (resp->type != "Ack") {
        r.error = resp->payload.value("code", "peer_error");
        return r;
    }
    r.ok = resp->payload.value("ok", false);
    if (auto raw = canon::fromB64(resp->payload.value("result", ""))) r.result = std::move(*raw);
    splitPayload(r.result, r.value, r.errorCode);
    return r;
}

SubmitResult GatewayClient::submitResultFrom(const std::optional<net::Envelope>& resp) {
    SubmitResult r;
    if (!resp) {
        r.error = "transport";
        return r;
    }
    if (resp->type != "Ack") {
        r.error = resp->payload.value("code", "peer_error");
        return r;
    }
    r.txId = resp->payload.value("txId", "");
    r.code = resp->payload.value("code", "");
    r.errorCode = resp->payload.value("errorCode", "");
    r.blockNumber = resp->payload.value("blockNumber", std::int64_t{-1});
    if (auto raw = canon::fromB64(resp->payload.value("result", ""))) r.result = std::move(*raw);
    std::string ignored;
    splitPayload(r.result, r.value, ignored);
    return r;
}

EvalResult GatewayClient::evaluate(const std::string& op, const std::vector<std::string>& args,
                                   int timeoutMs) {
    if (!connected()) return {false, {}, "not_connected"};
    net::Envelope e;
    e.type = "Evaluate";
    e.payload = proposalPayload(op, args);
    return evalResultFrom(mux_->call(std::move(e), timeoutMs));
}

SubmitResult GatewayClient::submit(const std::string& op, const std::vector<std::string>& args,
                                   int timeoutMs) {
    if (!connected()) {
        SubmitResult r;
        r.error = "not_connected";
        return r;
    }
    net::Envelope e;
    e.type = "Submit";
    e.payload = proposalPayload(op, args);
    e.payload["timeoutMs"] = timeoutMs;
    // The peer's janitor answers at its own deadline; the extra slack
    // means a late janitor beats the client timer.
    return submitResultFrom(mux_->call(std::move(e), timeoutMs + 5000));
}

void GatewayClient::evaluateAsync(const std::string& op, const std::vector<std::string>& args,
                                  std::function<void(EvalResult)> done) {
    if (!connected()) {
        done({false, {}, "not_connected"});
        return;
    }
    net::Envelope e;
    e.type = "Evaluate";
    e.payload = proposalPayload(op, args);
    if (!mux_->callAsync(std::move(e), [done = std::move(done)](std::optional<net::Envelope> resp) {
            done(evalResultFrom(resp));
        })) {
        // callAsync already invoked done on a dead link; nothing to do.
    }
}

void GatewayClient::submitAsync(const std::string& op, const std::vector<std::string>& args,
                                int timeoutMs, std::function<void(SubmitResult)> done) {
    if (!connected()) {
        SubmitResult r;
        r.error = "not_connected";
        done(std::move(r));
        return;
    }
    net::Envelope e;
    e.type = "Submit";
    e.payload = proposalPayload(op, args);
    e.payload["timeoutMs"] = timeoutMs;
    mux_->callAsync(std::move(e), [done = std::move(done)](std::optional<net::Envelope> resp) {
        done(submitResultFrom(resp));
    });
}

bool GatewayClient::subscribe(const Json& filter,
                              std::optional<std::pair<std::int64_t, std::int64_t>> from,
                              std::function<void(const Json&)> onEvent) {
    if (!connected()) return false;
    net::Envelope e;
    e.type = "Subscribe";
    e.payload = Json{{"filter", filter}};
    if (from) e.payload["from"] = Json{{"block", from->first}, {"tx", from->second}};
    // The signature covers the ref, so allocate it before signing.
    e.ref = mux_->allocRef();
    e.sign(identity_);
    auto accepted = std::make_shared<std::promise<bool>>();
    auto fut = accepted->get_future();
    auto first = std::make_shared<std::atomic<bool>>(false);
    auto ref = mux_->stream(std::move(e), [accepted, first, onEvent = std::move(onEvent)](
                                              const net::Envelope& ev) {
        if (!first->exchange(true)) {
            accepted->set_value(ev.type == "Ack");
            return;
        }
        if (ev.type == "Event") onEvent(ev.payload);
    });
    if (ref == 0) return false;
    if (fut.wait_for(std::chrono::seconds(5)) != std::future_status::ready) return false;
    return fut.get();
}

std::optional<Json> GatewayClient::stats(int timeoutMs) {
    if (!connected()) return std::nullopt;
    net::Envelope e;
    e.type = "Stats";
    auto resp = mux_->call(std::move(e), timeoutMs);
    if (!resp || resp->type != "Ack") return std::nullopt;
    return resp->payload;
}

void GatewayClient::close() {
    if (mux_) mux_->close();
}

std::optional<std::string> auxPut(const std::string& host, int port, const Bytes& data,
                                  std::string* error) {
    auto mux = net::MuxClient::dial(host, port);
    if (!mux) {
        if (error) *error = "transport";
        return std::nullopt;
    }
    net::Envelope e;
    e.type = "AuxPut";
    e.payload = Json{{"data", canon::b64(data)}};
    auto resp = mux->call(std::move(e), 15000);
    if (!resp) {
        if (error) *error = "transport";
        return std::nullopt;
    }
    if (resp->type != "Ack") {
        if (error) *error = resp->payload.value("code", "aux_error");
        return std::nullopt;
    }
    return resp->payload.value("uri", "");
}

std::optional<Bytes> auxGet(const std::string& host, int port, const std::string& uri,
                            std::string* error) {
    auto mux = net::MuxClient::dial(host, port);
    if (!mux) {
        if (error) *error = "transport";
        return std::nullopt;
    }
    net::Envelope e;
    e.type = "AuxGet";
    e.payload = Json{{"uri", uri}};
    auto resp = mux->call(std::move(e), 15000);
    if (!resp) {
        if (error) *error = "transport";
        return std::nullopt;
    }
    if (resp->type != "Ack") {
        if (error) *error = resp->payload.value("code", "aux_error");
        return std::nullopt;
    }
    auto raw = canon::fromB64(resp->payload.value("data", ""));
    if (!raw) {
        if (error) *error = "bad_payload";
        return std::nullopt;
    }
    return *raw;
}

} // namespace iotbc
