#include "iotbc/net.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

namespace iotbc::net {

namespace {

std::atomic<std::int64_t> g_bytesIn{0};
std::atomic<std::int64_t> g_bytesOut{0};

bool readExact(int fd, std::uint8_t* buf, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
        ssize_t r = ::recv(fd, buf + got, n - got, 0);
        if (r == 0) return false;
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        got += static_cast<std::size_t>(r);
    }
    g_bytesIn.fetch_add(static_cast<std::int64_t>(n), std::memory_order_relaxed);
    return true;
}

bool writeAll(int fd, const std::uint8_t* buf, std::size_t n) {
    std::size_t sent = 0;
    while (sent < n) {
        ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        sent += static_cast<std::size_t>(r);
    }
    g_bytesOut.fetch_add(static_cast<std::int64_t>(n), std::memory_order_relaxed);
    return true;
}

} // namespace

std::int64_t bytesIn() { return g_bytesIn.load(std::memory_order_relaxed); }
std::int64_t bytesOut() { return g_bytesOut.load(std::memory_order_relaxed); }

bool writeFrame(int fd, const Bytes& payload) {
    if (payload.size() > kMaxFrameBytes) return false;
    std::uint8_t head[4];
    auto n = static_cast<std::uint32_t>(payload.size());
    head[0] = static_cast<std::uint8_t>(n >> 24);
    head[1] = static_cast<std::uint8_t>(n >> 16);
    head[2] = static_cast<std::uint8_t>(n >> 8);
    head[3] = static_cast<std::uint8_t>(n);
    if (!writeAll(fd, head, 4)) return false;
    return payload.empty() || writeAll(fd, payload.data(), payload.size());
}

std::optional<Bytes> readFrame(int fd) {
    std::uint8_t head[4];
    if (!readExact(fd, head, 4)) return std::nullopt;
    std::uint32_t n = (std::uint32_t(head[0]) << 24) | (std::uint32_t(head[1]) << 16) |
                      (std::uint32_t(head[2]) << 8) | std::uint32_t(head[3]);
    if (n > kMaxFrameBytes) return std::nullopt;
    Bytes payload(n);
    if (n > 0 && !readExact(fd, payload.data(), n)) return std::nullopt;
    return payload;
}

Json Envelope::toJson() const {
    Json j{{"type", type}, {"ref", ref}, {"payload", payload}};
    if (senderCertificate) j["senderCertificate"] = senderCertificate->toJson();
    if (!signature.empty()) j["signature"] = canon::b64(signature);
    return j;
}

std::optional<Envelope> Envelope::fromJson(const Json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) return std::nullopt;
    Envelope e;
    try {
        e.type = j["type"].get<std::string>();
        e.ref = j.value("ref", std::int64_t{0});
        if (j.contains("payload")) e.payload = j["payload"];
        if (j.contains("senderCertificate")) {
            auto cert = Certificate::fromJson(j["senderCertificate"]);
            if (!cert) return std::nullopt;
            e.senderCertificate = std::move(*cert);
        }
        if (j.contains("signature")) {
            auto sig = canon::fromB64(j["signature"].get<std::string>());
            if (!sig) return std::nullopt;
            e.signature = std::move(*sig);
        }
    } catch (const Json::exception&) {
        return std::nullopt;
    }
    return e;
}

Bytes Envelope::signedBytes() const {
    return canon::dumpBytes(Json{{"payload", payload}, {"ref", ref}, {"type", type}});
}

void Envelope::sign(const Identity& id) {
    senderCertificate = id.certificate;
    signature = id.sign(signedBytes());
}

bool Envelope::signatureValid() const {
    if (!senderCertificate || signature.empty()) return false;
    return crypto::verify(signedBytes(), signature, senderCertificate->publicKey);
}

Envelope makeAck(std::int64_t ref, Json payload) {
    Envelope e;
    e.type = "Ack";
    e.ref = ref;
    e.payload = std::move(payload);
    return e;
}

Envelope makeError(std::int64_t ref, const std::string& code, const std::string& message,
                   Json data) {
    Envelope e;
    e.type = "Error";
    e.ref = ref;
    e.payload = Json{{"code", code}, {"message", message}, {"data", std::move(data)}};
    return e;
}

Conn::Conn(int fd, int delayMs) : fd_(fd), delayMs_(delayMs) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Conn::~Conn() {
    if (fd_ >= 0) ::close(fd_);
}

bool Conn::send(const Envelope& e) {
    Bytes raw = canon::dumpBytes(e.toJson());
    if (delayMs_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delayMs_));
    std::lock_guard lock(writeMu_);
    return writeFrame(fd_, raw);
}

std::optional<Envelope> Conn::recv() {
    auto raw = readFrame(fd_);
    if (!raw) return std::nullopt;
    auto j = canon::parse(*raw);
    if (!j) return std::nullopt;
    return Envelope::fromJson(*j);
}

void Conn::shutdown() { ::shutdown(fd_, SHUT_RDWR); }

std::shared_ptr<Conn> dial(const std::string& host, int port, int delayMs) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return nullptr;
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        return nullptr;
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        return nullptr;
    }
    return std::make_shared<Conn>(fd, delayMs);
}

Server::~Server() { stop(); }

bool Server::start(int port, Handler handler, Disconnect onDisconnect) {
    handler_ = std::move(handler);
    onDisconnect_ = std::move(onDisconnect);
    listenFd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listenFd_ < 0) return false;
    int one = 1;
    ::setsockopt(listenFd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listenFd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listenFd_, 256) != 0) {
        ::close(listenFd_);
        listenFd_ = -1;
        return false;
    }
    acceptThread_ = std::thread([this] {
        while (!stopping_.load()) {
            int fd = ::accept(listenFd_, nullptr, nullptr);
            if (fd < 0) {
                if (stopping_.load()) break;
                if (errno == EINTR) continue;
                break;
            }
            auto conn = std::make_shared<Conn>(fd, 0);
            std::lock_guard lock(mu_);
            if (stopping_.load()) break;
            conns_.push_back(conn);
            threads_.emplace_back([this, conn] { serve(conn); });
        }
    });
    return true;
}

void Server::serve(std::shared_ptr<Conn> conn) {
    while (true) {
        auto e = conn->recv();
        if (!e) break;
        std::uint64_t ref = e->ref;
        try {
            handler_(conn, std::move(*e));
        } catch (const std::exception& ex) {
            // A malformed payload must cost the sender an error, not us the
            // process.
            conn->send(makeError(ref, "bad_request", ex.what()));
        }
    }
    if (onDisconnect_) onDisconnect_(conn);
    std::lock_guard lock(mu_);
    std::erase(conns_, conn);
}

void Server::stop() {
    if (listenFd_ < 0) return;
    stopping_.store(true);
    ::shutdown(listenFd_, SHUT_RDWR);
    ::close(listenFd_);
    if (acceptThread_.joinable()) acceptThread_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(mu_);
        for (auto& c : conns_) c->shutdown();
        threads.swap(threads_);
    }
    for (auto& t : threads)
        if (t.joinable()) t.join();
    listenFd_ = -1;
}

MuxClient::MuxClient(std::shared_ptr<Conn> conn) : conn_(std::move(conn)) {
    reader_ = std::thread([this] { readLoop(); });
}

std::shared_ptr<MuxClient> MuxClient::dial(const std::string& host, int port, int delayMs) {
    auto conn = net::dial(host, port, delayMs);
    if (!conn) return nullptr;
    return std::shared_ptr<MuxClient>(new MuxClient(std::move(conn)));
}

MuxClient::~MuxClient() {
    close();
    if (reader_.joinable()) reader_.join();
}

void MuxClient::readLoop() {
    while (true) {
        auto e = conn_->recv();
        if (!e) break;
        ResponseFn done;
        EventFn onEvent;
        {
            std::lock_guard lock(mu_);
            auto p = pending_.find(e->ref);
            if (p != pending_.end()) {
                done = std::move(p->second);
                pending_.erase(p);
            } else if (auto s = streams_.find(e->ref); s != streams_.end()) {
                onEvent = s->second;
            }
        }
        if (done) done(std::move(e));
        else if (onEvent) onEvent(*e);
    }
    alive_.store(false);
    // Fail every waiter so nothing blocks on a dead link.
    std::map<std::int64_t, ResponseFn> orphans;
    {
        std::lock_guard lock(mu_);
        orphans.swap(pending_);
        streams_.clear();
    }
    for (auto& [ref, fn] : orphans) fn(std::nullopt);
}

bool MuxClient::callAsync(Envelope e, ResponseFn done) {
    e.ref = nextRef_.fetch_add(1);
    {
        std::lock_guard lock(mu_);
        pending_[e.ref] = std::move(done);
    }
    if (!alive_.load() || !conn_->send(e)) {
        ResponseFn fn;
        {
            std::lock_guard lock(mu_);
            auto it = pending_.find(e.ref);
            if (it == pending_.end()) return true;  // readLoop already failed it
            fn = std::move(it->second);
            pending_.erase(it);
        }
        fn(std::nullopt);
        return false;
    }
    return true;
}

std::optional<Envelope> MuxClient::call(Envelope e, int timeoutMs) {
    struct Waiter {
        std::mutex mu;
        std::condition_variable cv;
        std::optional<Envelope> result;
        bool done = false;
    };
    auto w = std::make_shared<Waiter>();
    e.ref = nextRef_.fetch_add(1);
    const std::int64_t ref = e.ref;
    {
        std::lock_guard lock(mu_);
        pending_[ref] = [w](std::optional<Envelope> r) {
            std::lock_guard wlock(w->mu);
            w->result = std::move(r);
            w->done = true;
            w->cv.notify_one();
        };
    }
    if (!alive_.load() || !conn_->send(e)) {
        std::lock_guard lock(mu_);
        pending_.erase(ref);
        return std::nullopt;
    }
    std::unique_lock wlock(w->mu);
    if (!w->cv.wait_for(wlock, std::chrono::milliseconds(timeoutMs), [&] { return w->done; })) {
        // The shared waiter keeps a late response harmless.
        std::lock_guard lock(mu_);
        pending_.erase(ref);
        return std::nullopt;
    }
    return std::move(w->result);
}

std::int64_t MuxClient::stream(Envelope e, EventFn onEvent) {
    // Signed envelopes cover the ref, so the caller may allocate it first
    // via allocRef() and sign before handing the envelope over.
    if (e.ref == 0) e.ref = nextRef_.fetch_add(1);
    {
        std::lock_guard lock(mu_);
        streams_[e.ref] = std::move(onEvent);
    }
    if (!conn_->send(e)) {
        std::lock_guard lock(mu_);
        streams_.erase(e.ref);
        return 0;
    }
    return e.ref;
}

bool MuxClient::send(Envelope e) {
    if (e.ref == 0) e.ref = nextRef_.fetch_add(1);
    return conn_->send(e);
}

void MuxClient::close() {
    conn_->shutdown();
}

} // namespace iotbc::net
