#include "iotbc/contracts.hpp"

#include <algorithm>

namespace iotbc {

namespace {

bool validSegment(const std::string& s) {
    return !s.empty() && s.find('/') == std::string::npos;
}

} // namespace

std::optional<std::string> makeDeviceKey(const std::string& org, const std::string& deviceId) {
    if (!validSegment(org) || !validSegment(deviceId)) return std::nullopt;
    return "dev/" + org + "/" + deviceId;
}

std::optional<std::string> makeServiceKey(const std::string& org, const std::string& deviceId,
                                          const std::string& name) {
    if (!validSegment(org) || !validSegment(deviceId) || !validSegment(name))
        return std::nullopt;
    return "svc/" + org + "/" + deviceId + "/" + name;
}

std::optional<std::string> makeRequestKey(const std::string& requestId) {
    if (!validSegment(requestId)) return std::nullopt;
    return "req/" + requestId;
}

std::optional<std::string> makeResponseKey(const std::string& requestId) {
    if (!validSegment(requestId)) return std::nullopt;
    return "rsp/" + requestId;
}

Json DeviceRecord::toJson() const {
    return Json{{"deviceId", deviceId},
                {"organizationId", organizationId},
                {"name", name},
                {"description", description},
                {"lastUpdateTime", canon::formatTimeMs(lastUpdateTimeMs)}};
}

std::optional<DeviceRecord> DeviceRecord::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        DeviceRecord r;
        r.deviceId = j.at("deviceId").get<std::string>();
        r.organizationId = j.at("organizationId").get<std::string>();
        r.name = j.at("name").get<std::string>();
        r.description = j.at("description").get<std::string>();
        auto t = canon::parseTimeMs(j.at("lastUpdateTime").get<std::string>());
        if (!t) return std::nullopt;
        r.lastUpdateTimeMs = *t;
        return r;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Json ServiceRecord::toJson() const {
    return Json{{"name", name},
                {"deviceId", deviceId},
                {"organizationId", organizationId},
                {"version", version},
                {"description", description},
                {"lastUpdateTime", canon::formatTimeMs(lastUpdateTimeMs)}};
}

std::optional<ServiceRecord> ServiceRecord::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        ServiceRecord r;
        r.name = j.at("name").get<std::string>();
        r.deviceId = j.at("deviceId").get<std::string>();
        r.organizationId = j.at("organizationId").get<std::string>();
        r.version = j.at("version").get<std::int64_t>();
        r.description = j.at("description").get<std::string>();
        auto t = canon::parseTimeMs(j.at("lastUpdateTime").get<std::string>());
        if (!t) return std::nullopt;
        r.lastUpdateTimeMs = *t;
        return r;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Json ServiceRef::toJson() const {
    return Json{{"name", name}, {"deviceId", deviceId}, {"organizationId", organizationId}};
}

std::optional<ServiceRef> ServiceRef::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        ServiceRef r;
        r.name = j.at("name").get<std::string>();
        r.deviceId = j.at("deviceId").get<std::string>();
        r.organizationId = j.at("organizationId").get<std::string>();
        return r;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Json ServiceRequestRecord::toJson() const {
    Json args = Json::array();
    for (const auto& a : arguments) args.push_back(a);
    return Json{{"id", id},
                {"time", canon::formatTimeMs(timeMs)},
                {"service", service.toJson()},
                {"method", method},
                {"arguments", std::move(args)},
                {"requesterId", requesterId},
                {"requesterOrg", requesterOrg}};
}

std::optional<ServiceRequestRecord> ServiceRequestRecord::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        ServiceRequestRecord r;
        r.id = j.at("id").get<std::string>();
        auto t = canon::parseTimeMs(j.at("time").get<std::string>());
        if (!t) return std::nullopt;
        r.timeMs = *t;
        auto svc = ServiceRef::fromJson(j.at("service"));
        if (!svc) return std::nullopt;
        r.service = *svc;
        r.method = j.at("method").get<std::string>();
        if (j.contains("arguments")) {
            if (!j["arguments"].is_array()) return std::nullopt;
            for (const auto& a : j["arguments"]) r.arguments.push_back(a.get<std::string>());
        }
        if (j.contains("requesterId")) r.requesterId = j["requesterId"].get<std::string>();
        if (j.contains("requesterOrg")) r.requesterOrg = j["requesterOrg"].get<std::string>();
        return r;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

Json ServiceResponseRecord::toJson() const {
    return Json{{"requestId", requestId},
                {"time", canon::formatTimeMs(timeMs)},
                {"statusCode", statusCode},
                {"returnValue", returnValue ? Json(canon::b64(*returnValue)) : Json(nullptr)}};
}

std::optional<ServiceResponseRecord> ServiceResponseRecord::fromJson(const Json& j) {
    if (!j.is_object()) return std::nullopt;
    try {
        ServiceResponseRecord r;
        r.requestId = j.at("requestId").get<std::string>();
        auto t = canon::parseTimeMs(j.at("time").get<std::string>());
        if (!t) return std::nullopt;
        r.timeMs = *t;
        r.statusCode = j.at("statusCode").get<std::int64_t>();
        if (j.contains("returnValue") && !j["returnValue"].is_null()) {
            auto v = canon::fromB64(j["returnValue"].get<std::string>());
            if (!v) return std::nullopt;
            r.returnValue = std::move(*v);
        }
        return r;
    } catch (const Json::exception&) {
        return std::nullopt;
    }
}

ContractResult ContractResult::success(Json value) {
    ContractResult r;
    r.ok = true;
    r.result = std::move(value);
    return r;
}

ContractResult ContractResult::failure(std::string code, std::string message) {
    ContractResult r;
    r.ok = false;
    r.errorCode = std::move(code);
    r.errorMessage = std::move(message);
    return r;
}

Bytes ContractResult::payloadBytes() const {
    Json j;
    if (ok)
        j["result"] = result;
    else
        j["error"] = Json{{"code", errorCode}, {"message", errorMessage}};
    return canon::dumpBytes(j);
}

bool isReadOnlyContractOp(const std::string& op) {
    return op == "get_device" || op == "get_all_devices" || op == "get_service" ||
           op == "get_all_services" || op == "get_request" || op == "get_all_requests" ||
           op == "get_response";
}

bool isContractOp(const std::string& op) {
    return isReadOnlyContractOp(op) || op == "register_device" || op == "deregister_device" ||
           op == "register_service" || op == "deregister_service" || op == "request_service" ||
           op == "respond_to_request" || op == "remove_request";
}

namespace {

using Args = std::vector<std::string>;

ContractResult fail(const char* code, std::string message) {
    return ContractResult::failure(code, std::move(message));
}

bool canWrite(const CallerContext& caller) {
    return caller.role == Role::Writer || caller.role == Role::Admin;
}

ContractResult registerDevice(StateView& view, const CallerContext& caller, const Args& args,
                              std::int64_t nowMs) {
    if (!canWrite(caller)) return fail(kErrAccessDenied, "reader role cannot register");
    if (args.size() != 2) return fail(kErrBadArguments, "want (name, description)");
    auto key = makeDeviceKey(caller.orgId, caller.deviceId);
    if (!key) return fail(kErrBadArguments, "bad org or device id");
    DeviceRecord rec;
    rec.deviceId = caller.deviceId;
    rec.organizationId = caller.orgId;
    rec.name = args[0];
    rec.description = args[1];
    rec.lastUpdateTimeMs = nowMs;
    // Blind upsert: re-registration by the same identity refreshes the
    // record, and registration never depends on a prior read.
    view.put(*key, canon::dumpBytes(rec.toJson()));
    return ContractResult::success(rec.toJson());
}

ContractResult deregisterDevice(StateView& view, const CallerContext& caller, const Args& args) {
    if (!canWrite(caller)) return fail(kErrAccessDenied, "reader role cannot deregister");
    if (args.size() != 2) return fail(kErrBadArguments, "want (orgId, deviceId)");
    auto key = makeDeviceKey(args[0], args[1]);
    if (!key) return fail(kErrBadArguments, "bad org or device id");
    auto existing = view.get(*key);
    if (!existing) return fail(kErrNotFound, "device not registered");
    if (args[0] != caller.orgId || args[1] != caller.deviceId)
        return fail(kErrAccessDenied, "only the device itself may deregister");
    // Cascade: the device's services go with it.
    for (const auto& [svcKey, value] : view.scanPrefix("svc/" + args[0] + "/" + args[1] + "/"))
        view.del(svcKey);
    view.del(*key);
    return ContractResult::success(Json{{"removed", args[1]}});
}

ContractResult getDevice(StateView& view, const Args& args) {
    if (args.size() != 2) return fail(kErrBadArguments, "want (orgId, deviceId)");
    auto key = makeDeviceKey(args[0], args[1]);
    if (!key) return fail(kErrBadArguments, "bad org or device id");
    auto raw = view.get(*key);
    if (!raw) return fail(kErrNotFound, "no such device");
    auto j = canon::parse(*raw);
    if (!j) return fail(kErrNotFound, "unreadable record");
    return ContractResult::success(*j);
}

ContractResult getAllDevices(StateView& view, const Args& args) {
    if (args.size() != 1) return fail(kErrBadArguments, "want (orgId)");
    if (args[0].empty() || args[0].find('/') != std::string::npos)
        return fail(kErrBadArguments, "bad org id");
    Json out = Json::array();
    for (const auto& [key, value] : view.scanPrefix("dev/" + args[0] + "/")) {
        auto j = canon::parse(value);
        if (j) out.push_back(*j);
    }
    return ContractResult::success(out);
}

// The caller's own registered device record, or an error. Shared
// precondition of every service mutation.
std::optional<ContractResult> requireOwnDevice(StateView& view, const CallerContext& caller) {
    auto key = makeDeviceKey(caller.orgId, caller.deviceId);
    if (!key) return fail(kErrBadArguments, "bad caller identity");
    if (!view.get(*key)) return fail(kErrDeviceNotRegistered, "register the device first");
    return std::nullopt;
}

ContractResult registerService(StateView& view, const CallerContext& caller, const Args& args,
                               std::int64_t nowMs) {
    if (!canWrite(caller)) return fail(kErrAccessDenied, "reader role cannot register");
    if (args.size() != 3) return fail(kErrBadArguments, "want (name, version, description)");
    if (auto err = requireOwnDevice(view, caller)) return *err;
    std::int64_t version = 0;
    try {
        size_t pos = 0;
        version = std::stoll(args[1], &pos);
        if (pos != args[1].size()) return fail(kErrBadArguments, "version not an integer");
    } catch (const std::exception&) {
        return fail(kErrBadArguments, "version not an integer");
    }
    if (version < 1) return fail(kErrBadArguments, "version must be >= 1");
    auto key = makeServiceKey(caller.orgId, caller.deviceId, args[0]);
    if (!key) return fail(kErrBadArguments, "bad service name");
    if (auto raw = view.get(*key)) {
        auto existing = ServiceRecord::fromJson(*canon::parse(*raw));
        if (existing && version <= existing->version)
            return fail(kErrStaleVersion, "version must increase");
    }
    ServiceRecord rec;
    rec.name = args[0];
    rec.deviceId = caller.deviceId;
    rec.organizationId = caller.orgId;
    rec.version = version;
    rec.description = args[2];
    rec.lastUpdateTimeMs = nowMs;
    view.put(*key, canon::dumpBytes(rec.toJson()));
    return ContractResult::success(rec.toJson());
}

ContractResult deregisterService(StateView& view, const CallerContext& caller,
                                 const Args& args) {
    if (!canWrite(caller)) return fail(kErrAccessDenied, "reader role cannot deregister");
    if (args.size() != 1) return fail(kErrBadArguments, "want (name)");
    if (auto err = requireOwnDevice(view, caller)) return *err;
    auto key = makeServiceKey(caller.orgId, caller.deviceId, args[0]);
    if (!key) return fail(kErrBadArguments, "bad service name");
    if (!view.get(*key)) return fail(kErrNotFound, "no such service");
    view.del(*key);
    return ContractResult::success(Json{{"removed", args[0]}});
}

ContractResult getService(StateView& view, const Args& args) {
    if (args.size() != 3) return fail(kErrBadArguments, "want (orgId, deviceId, name)");
    auto key = makeServiceKey(args[0], args[1], args[2]);
    if (!key) return fail(kErrBadArguments, "bad service coordinates");
    auto raw = view.get(*key);
    if (!raw) return fail(kErrNotFound, "no such service");
    auto j = canon::parse(*raw);
    if (!j) return fail(kErrNotFound, "unreadable record");
    return ContractResult::success(*j);
}

ContractResult getAllServices(StateView& view, const Args& args) {
    if (args.size() != 1) return fail(kErrBadArguments, "want (orgId)");
    if (args[0].empty() || args[0].find('/') != std::string::npos)
        return fail(kErrBadArguments, "bad org id");
    Json out = Json::array();
    // Keys sort as svc/{org}/{deviceId}/{name}, which is exactly the
    // required (deviceId, name) order.
    for (const auto& [key, value] : view.scanPrefix("svc/" + args[0] + "/")) {
        auto j = canon::parse(value);
        if (j) out.push_back(*j);
    }
    return ContractResult::success(out);
}

ContractResult requestService(StateView& view, const CallerContext& caller, const Args& args) {
    if (!canWrite(caller)) return fail(kErrAccessDenied, "reader role cannot request");
    if (args.size() != 1) return fail(kErrBadArguments, "want (request)");
    auto parsed = canon::parse(args[0]);
    if (!parsed) return fail(kErrBadArguments, "request is not valid json");
    auto req = ServiceRequestRecord::fromJson(*parsed);
    if (!req) return fail(kErrBadArguments, "malformed request record");
    auto reqKey = makeRequestKey(req->id);
    if (!reqKey) return fail(kErrBadArguments, "bad request id");
    if (view.get(*reqKey)) return fail(kErrDuplicateRequestId, "request id already used");
    auto svcKey = makeServiceKey(req->service.organizationId, req->service.deviceId,
                                 req->service.name);
    if (!svcKey) return fail(kErrBadArguments, "bad service reference");
    if (!view.get(*svcKey)) return fail(kErrServiceNotFound, "no such service");
    req->requesterId = caller.deviceId;
    req->requesterOrg = caller.orgId;
    view.put(*reqKey, canon::dumpBytes(req->toJson()));
    return ContractResult::success(req->toJson());
}

ContractResult respondToRequest(StateView& view, const CallerContext& caller,
                                const Args& args) {
    if (!canWrite(caller)) return fail(kErrAccessDenied, "reader role cannot respond");
    if (args.size() != 1) return fail(kErrBadArguments, "want (response)");
    auto parsed = canon::parse(args[0]);
    if (!parsed) return fail(kErrBadArguments, "response is not valid json");
    auto rsp = ServiceResponseRecord::fromJson(*parsed);
    if (!rsp) return fail(kErrBadArguments, "malformed response record");
    auto reqKey = makeRequestKey(rsp->requestId);
    auto rspKey = makeResponseKey(rsp->requestId);
    if (!reqKey || !rspKey) return fail(kErrBadArguments, "bad request id");
    auto reqRaw = view.get(*reqKey);
    if (!reqRaw) return fail(kErrRequestNotFound, "no such request");
    auto req = ServiceRequestRecord::fromJson(*canon::parse(*reqRaw));
    if (!req) return fail(kErrRequestNotFound, "unreadable request record");
    if (req->service.deviceId != caller.deviceId ||
        req->service.organizationId != caller.orgId)
        return fail(kErrAccessDenied, "only the requested service's device may respond");
    if (view.get(*rspKey)) return fail(kErrAlreadyResponded, "response already recorded");
    view.put(*rspKey, canon::dumpBytes(rsp->toJson()));
    return ContractResult::success(rsp->toJson());
}

ContractResult getRequest(StateView& view, const Args& args) {
    if (args.size() != 1) return fail(kErrBadArguments, "want (requestId)");
    auto key = makeRequestKey(args[0]);
    if (!key) return fail(kErrBadArguments, "bad request id");
    auto raw = view.get(*key);
    if (!raw) return fail(kErrNotFound, "no such request");
    auto j = canon::parse(*raw);
    if (!j) return fail(kErrNotFound, "unreadable record");
    return ContractResult::success(*j);
}

ContractResult getAllRequests(StateView& view, const Args& args) {
    if (args.size() != 2) return fail(kErrBadArguments, "want (orgId, deviceId)");
    std::vector<ServiceRequestRecord> pending;
    for (const auto& [key, value] : view.scanPrefix("req/")) {
        auto j = canon::parse(value);
        if (!j) continue;
        auto req = ServiceRequestRecord::fromJson(*j);
        if (!req) continue;
        if (req->service.organizationId != args[0] || req->service.deviceId != args[1])
            continue;
        auto rspKey = makeResponseKey(req->id);
        if (rspKey && view.get(*rspKey)) continue;  // answered, no longer pending
        pending.push_back(std::move(*req));
    }
    std::sort(pending.begin(), pending.end(), [](const auto& a, const auto& b) {
        return a.timeMs != b.timeMs ? a.timeMs < b.timeMs : a.id < b.id;
    });
    Json out = Json::array();
    for (const auto& r : pending) out.push_back(r.toJson());
    return ContractResult::success(out);
}

ContractResult getResponse(StateView& view, const Args& args) {
    if (args.size() != 1) return fail(kErrBadArguments, "want (requestId)");
    auto key = makeResponseKey(args[0]);
    if (!key) return fail(kErrBadArguments, "bad request id");
    auto raw = view.get(*key);
    if (!raw) return fail(kErrNotFound, "no response yet");
    auto j = canon::parse(*raw);
    if (!j) return fail(kErrNotFound, "unreadable record");
    return ContractResult::success(*j);
}

ContractResult removeRequest(StateView& view, const CallerContext& caller, const Args& args) {
    if (!canWrite(caller)) return fail(kErrAccessDenied, "reader role cannot remove");
    if (args.size() != 1) return fail(kErrBadArguments, "want (requestId)");
    auto reqKey = makeRequestKey(args[0]);
    auto rspKey = makeResponseKey(args[0]);
    if (!reqKey || !rspKey) return fail(kErrBadArguments, "bad request id");
    auto reqRaw = view.get(*reqKey);
    if (!reqRaw) return fail(kErrNotFound, "no such request");
    auto req = ServiceRequestRecord::fromJson(*canon::parse(*reqRaw));
    if (!req) return fail(kErrNotFound, "unreadable request record");
    bool isRequester =
            req->requesterId == caller.deviceId && req->requesterOrg == caller.orgId;
    bool isTargetOwner = req->service.deviceId == caller.deviceId &&
                         req->service.organizationId == caller.orgId;
    if (!isRequester && !isTargetOwner)
        return fail(kErrAccessDenied, "only the requester or the target device may remove");
    if (view.get(*rspKey)) view.del(*rspKey);
    view.del(*reqKey);
    return ContractResult::success(Json{{"removed", args[0]}});
}

} // namespace

ContractResult runContract(StateView& view, const CallerContext& caller, const std::string& op,
                           const std::vector<std::string>& args,
                           std::int64_t clientTimestampMs) {
    if (op == "register_device") return registerDevice(view, caller, args, clientTimestampMs);
    if (op == "deregister_device") return deregisterDevice(view, caller, args);
    if (op == "get_device") return getDevice(view, args);
    if (op == "get_all_devices") return getAllDevices(view, args);
    if (op == "register_service") return registerService(view, caller, args, clientTimestampMs);
    if (op == "deregister_service") return deregisterService(view, caller, args);
    if (op == "get_service") return getService(view, args);
    if (op == "get_all_services") return getAllServices(view, args);
    if (op == "request_service") return requestService(view, caller, args);
    if (op == "respond_to_request") return respondToRequest(view, caller, args);
    if (op == "get_request") return getRequest(view, args);
    if (op == "get_all_requests") return getAllRequests(view, args);
    if (op == "get_response") return getResponse(view, args);
    if (op == "remove_request") return removeRequest(view, caller, args);
    return ContractResult::failure(kErrUnknownOperation, "no such operation: " + op);
}

} // namespace iotbc
