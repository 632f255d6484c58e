#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iotbc/canon.hpp"
#include "iotbc/identity.hpp"

namespace iotbc {

// World-state key scheme. '/' separates segments and is forbidden inside
// org, deviceId, and name segments.
std::optional<std::string> makeDeviceKey(const std::string& org, const std::string& deviceId);
std::optional<std::string> makeServiceKey(const std::string& org, const std::string& deviceId,
                                          const std::string& name);
std::optional<std::string> makeRequestKey(const std::string& requestId);
std::optional<std::string> makeResponseKey(const std::string& requestId);

struct DeviceRecord {
    std::string deviceId;
    std::string organizationId;
    std::string name;
    std::string description;
    std::int64_t lastUpdateTimeMs = 0;

    Json toJson() const;
    static std::optional<DeviceRecord> fromJson(const Json& j);
};

struct ServiceRecord {
    std::string name;
    std::string deviceId;
    std::string organizationId;
    std::int64_t version = 1;
    std::string description;
    std::int64_t lastUpdateTimeMs = 0;

    Json toJson() const;
    static std::optional<ServiceRecord> fromJson(const Json& j);
};

struct ServiceRef {
    std::string name;
    std::string deviceId;
    std::string organizationId;

    Json toJson() const;
    static std::optional<ServiceRef> fromJson(const Json& j);
};

struct ServiceRequestRecord {
    std::string id;
    std::int64_t timeMs = 0;
    ServiceRef service;
    std::string method;
    std::vector<std::string> arguments;
    // Filled in by the contract from the verified caller, not by the
    // client: routes response notifications and gates remove_request.
    std::string requesterId;
    std::string requesterOrg;

    Json toJson() const;
    static std::optional<ServiceRequestRecord> fromJson(const Json& j);
};

struct ServiceResponseRecord {
    std::string requestId;
    std::int64_t timeMs = 0;
    std::int64_t statusCode = 0;
    std::optional<Bytes> returnValue;

    Json toJson() const;
    static std::optional<ServiceResponseRecord> fromJson(const Json& j);
};

// Reads and writes a contract makes during one simulation. The execution
// module's implementation snapshots committed state, overlays pending
// writes, and records the read/write sets.
class StateView {
public:
    virtual ~StateView() = default;
    virtual std::optional<Bytes> get(const std::string& key) = 0;
    virtual void put(const std::string& key, Bytes value) = 0;
    virtual void del(const std::string& key) = 0;
    // Key-ordered; every returned entry counts as a read.
    virtual std::vector<std::pair<std::string, Bytes>> scanPrefix(const std::string& prefix) = 0;
};

struct CallerContext {
    std::string orgId;
    Role role = Role::Reader;
    std::string deviceId;  // derived from the caller's certificate
};

struct ContractResult {
    bool ok = false;
    Json result;               // set when ok
    std::string errorCode;     // set when !ok
    std::string errorMessage;  // human detail, not matched on

    static ContractResult success(Json value);
    static ContractResult failure(std::string code, std::string message);

    // {"result": ...} or {"error": {"code": ..., "message": ...}} in
    // canonical form; what clients see and endorsers sign.
    Bytes payloadBytes() const;
};

inline constexpr const char* kErrNotFound = "NotFound";
inline constexpr const char* kErrAccessDenied = "AccessDenied";
inline constexpr const char* kErrDuplicateRequestId = "DuplicateRequestId";
inline constexpr const char* kErrServiceNotFound = "ServiceNotFound";
inline constexpr const char* kErrDeviceNotRegistered = "DeviceNotRegistered";
inline constexpr const char* kErrStaleVersion = "StaleVersion";
inline constexpr const char* kErrAlreadyResponded = "AlreadyResponded";
inline constexpr const char* kErrRequestNotFound = "RequestNotFound";
inline constexpr const char* kErrUnknownOperation = "UnknownOperation";
inline constexpr const char* kErrBadArguments = "BadArguments";

bool isReadOnlyContractOp(const std::string& op);
bool isContractOp(const std::string& op);

// Dispatches one operation against the view. Pure in (view, caller, op,
// args, clientTimestampMs); all nondeterminism lives outside.
ContractResult runContract(StateView& view, const CallerContext& caller, const std::string& op,
                           const std::vector<std::string>& args,
                           std::int64_t clientTimestampMs);

} // namespace iotbc
