#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "iotbc/canon.hpp"
#include "iotbc/identity.hpp"

namespace iotbc::net {

// Frames: 4-byte big-endian payload length, then that many bytes of
// canonical JSON. Oversized frames are treated as a protocol error.
constexpr std::size_t kMaxFrameBytes = 32u * 1024 * 1024;

// Cumulative per-process traffic, fed by every frame read and write.
std::int64_t bytesIn();
std::int64_t bytesOut();

bool writeFrame(int fd, const Bytes& payload);
std::optional<Bytes> readFrame(int fd);

// The envelope is the only thing on the wire. "ref" correlates responses
// and stream events with the request that opened them. The only envelopes
// that carry their own signature are those without a signed object inside
// (subscriptions); proposals, endorsements, and transactions are already
// signed at the object level.
struct Envelope {
    std::string type;
    std::int64_t ref = 0;
    Json payload = Json::object();
    std::optional<Certificate> senderCertificate;
    Bytes signature;

    Json toJson() const;
    static std::optional<Envelope> fromJson(const Json& j);
    Bytes signedBytes() const;
    void sign(const Identity& id);
    bool signatureValid() const;  // against senderCertificate's key
};

// One connected socket. Writes are whole-frame atomic under a lock so
// responses and pushed events interleave cleanly; reads belong to a
// single owner thread. An optional per-link delay emulates WAN latency.
class Conn {
public:
    Conn(int fd, int delayMs);
    ~Conn();

    bool send(const Envelope& e);
    std::optional<Envelope> recv();
    void shutdown();

    int fd() const { return fd_; }

private:
    int fd_;
    int delayMs_;
    std::mutex writeMu_;
};

std::shared_ptr<Conn> dial(const std::string& host, int port, int delayMs = 0);

Envelope makeAck(std::int64_t ref, Json payload = Json::object());
Envelope makeError(std::int64_t ref, const std::string& code, const std::string& message,
                   Json data = Json::object());

// Thread-per-connection accept loop. The handler runs on the connection's
// read thread: requests on one connection are processed in order, and
// long-lived work must register a callback rather than block.
class Server {
public:
    using Handler = std::function<void(std::shared_ptr<Conn>, Envelope)>;
    using Disconnect = std::function<void(std::shared_ptr<Conn>)>;

    ~Server();
    bool start(int port, Handler handler, Disconnect onDisconnect = nullptr);
    void stop();

private:
    int listenFd_ = -1;
    std::thread acceptThread_;
    Handler handler_;
    Disconnect onDisconnect_;
    std::mutex mu_;
    std::atomic<bool> stopping_{false};
    std::vector<std::shared_ptr<Conn>> conns_;
    std::vector<std::thread> threads_;

    void serve(std::shared_ptr<Conn> conn);
};

// Request/response multiplexing over one connection. call() assigns a
// fresh ref and waits; stream() routes every later frame carrying its ref
// to the given handler. All callbacks run on the reader thread and must
// return quickly.
class MuxClient {
public:
    using ResponseFn = std::function<void(std::optional<Envelope>)>;
    using EventFn = std::function<void(const Envelope&)>;

    static std::shared_ptr<MuxClient> dial(const std::string& host, int port, int delayMs = 0);
    ~MuxClient();

    std::optional<Envelope> call(Envelope e, int timeoutMs = 10000);
    bool callAsync(Envelope e, ResponseFn done);
    std::int64_t allocRef() { return nextRef_.fetch_add(1); }
    // Sends the request and routes its responses to onEvent; returns the
    // ref, or 0 on send failure.
    std::int64_t stream(Envelope e, EventFn onEvent);
    bool send(Envelope e);  // fire and forget
    void close();
    bool alive() const { return alive_.load(); }

private:
    explicit MuxClient(std::shared_ptr<Conn> conn);

    std::shared_ptr<Conn> conn_;
    std::thread reader_;
    std::atomic<bool> alive_{true};
    std::atomic<std::int64_t> nextRef_{1};
    std::mutex mu_;
    std::map<std::int64_t, ResponseFn> pending_;
    std::map<std::int64_t, EventFn> streams_;

    void readLoop();
};

} // namespace iotbc::net
