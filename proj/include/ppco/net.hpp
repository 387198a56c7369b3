#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "ppco/core.hpp"

namespace ppco::net {

// Reliable, ordered, bidirectional byte stream to one peer.
class Stream {
public:
    virtual ~Stream() = default;
    virtual size_t read_some(char* buf, size_t n) = 0;          // 0 means EOF
    virtual void write_all(const char* buf, size_t n) = 0;      // throws TransportClosed
    virtual void close() = 0;
};

class Listener {
public:
    virtual ~Listener() = default;
    virtual std::unique_ptr<Stream> accept() = 0;  // nullptr once closed
    virtual void close() = 0;
    virtual std::string endpoint() const = 0;      // actual bound endpoint
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual std::unique_ptr<Listener> listen(const std::string& endpoint) = 0;
    virtual std::unique_ptr<Stream> connect(const std::string& endpoint) = 0;
};

// ---------------------------------------------------------------------------
// Framing: 4-byte big-endian length prefix, then the XML payload. The cap is
// enforced on both the sending and the receiving side.
// ---------------------------------------------------------------------------

inline constexpr size_t max_frame_bytes = 16u * 1024u * 1024u;

inline void read_exact(Stream& s, char* buf, size_t n) {
    size_t got = 0;
    while (got < n) {
        size_t r = s.read_some(buf + got, n - got);
        if (r == 0) throw Error(Errc::transport_closed, "connection closed mid-frame");
        got += r;
    }
}

inline void write_frame(Stream& s, std::string_view payload) {
    if (payload.size() > max_frame_bytes)
        throw Error(Errc::transport_closed,
                    "frame of " + std::to_string(payload.size()) + " bytes exceeds the 16 MiB cap");
    unsigned char hdr[4] = {static_cast<unsigned char>(payload.size() >> 24),
                            static_cast<unsigned char>(payload.size() >> 16),
                            static_cast<unsigned char>(payload.size() >> 8),
                            static_cast<unsigned char>(payload.size())};
    s.write_all(reinterpret_cast<const char*>(hdr), 4);
    s.write_all(payload.data(), payload.size());
}

// nullopt on a clean EOF at a frame boundary.
inline std::optional<std::string> read_frame(Stream& s) {
    unsigned char hdr[4];
    size_t r = s.read_some(reinterpret_cast<char*>(hdr), 4);
    if (r == 0) return std::nullopt;
    if (r < 4) read_exact(s, reinterpret_cast<char*>(hdr) + r, 4 - r);
    size_t len = (static_cast<size_t>(hdr[0]) << 24) | (static_cast<size_t>(hdr[1]) << 16) |
                 (static_cast<size_t>(hdr[2]) << 8) | static_cast<size_t>(hdr[3]);
    if (len > max_frame_bytes)
        throw Error(Errc::transport_closed,
                    "peer announced a " + std::to_string(len) + " byte frame, over the 16 MiB cap");
    std::string payload(len, '\0');
    if (len > 0) read_exact(s, payload.data(), len);
    return payload;
}

// ---------------------------------------------------------------------------
// In-process loopback transport
// ---------------------------------------------------------------------------

namespace detail {

struct Pipe {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<char> buf;
    bool closed = false;

    void push(const char* data, size_t n) {
        std::unique_lock lk(mu);
        if (closed) throw Error(Errc::transport_closed, "loopback pipe closed");
        buf.insert(buf.end(), data, data + n);
        cv.notify_all();
    }

    size_t pull(char* out, size_t n) {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return !buf.empty() || closed; });
        if (buf.empty()) return 0;
        size_t take = std::min(n, buf.size());
        for (size_t i = 0; i < take; ++i) {
            out[i] = buf.front();
            buf.pop_front();
        }
        return take;
    }

    void close() {
        std::unique_lock lk(mu);
        closed = true;
        cv.notify_all();
    }
};

class PipeStream : public Stream {
public:
    PipeStream(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out)
        : in_(std::move(in)), out_(std::move(out)) {}

    ~PipeStream() override { close(); }

    size_t read_some(char* buf, size_t n) override { return in_->pull(buf, n); }
    void write_all(const char* buf, size_t n) override { out_->push(buf, n); }

    void close() override {
        in_->close();
        out_->close();
    }

private:
    std::shared_ptr<Pipe> in_;
    std::shared_ptr<Pipe> out_;
};

struct AcceptQueue {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::unique_ptr<Stream>> pending;
    bool closed = false;
};

}  // namespace detail

class LoopbackHub;

class LoopbackListener : public Listener {
public:
    LoopbackListener(std::string name, std::shared_ptr<detail::AcceptQueue> q)
        : name_(std::move(name)), q_(std::move(q)) {}

    std::unique_ptr<Stream> accept() override {
        std::unique_lock lk(q_->mu);
        q_->cv.wait(lk, [&] { return !q_->pending.empty() || q_->closed; });
        if (q_->pending.empty()) return nullptr;
        auto s = std::move(q_->pending.front());
        q_->pending.pop_front();
        return s;
    }

    void close() override {
        std::unique_lock lk(q_->mu);
        q_->closed = true;
        q_->cv.notify_all();
    }

    std::string endpoint() const override { return name_; }

private:
    std::string name_;
    std::shared_ptr<detail::AcceptQueue> q_;
};

// Named in-process endpoints; nodes in the same process connect through a
// shared hub. Frames travel the same framed-byte path as over sockets.
class LoopbackHub {
public:
    std::shared_ptr<detail::AcceptQueue> open(const std::string& name) {
        std::scoped_lock lk(mu_);
        auto& q = queues_[name];
        if (q && !q->closed)
            throw Error(Errc::bind_error, "loopback endpoint '" + name + "' already bound");
        q = std::make_shared<detail::AcceptQueue>();
        return q;
    }

    std::unique_ptr<Stream> connect(const std::string& name) {
        std::shared_ptr<detail::AcceptQueue> q;
        {
            std::scoped_lock lk(mu_);
            auto it = queues_.find(name);
            if (it != queues_.end()) q = it->second;
        }
        if (!q) throw Error(Errc::transport_closed, "no loopback endpoint '" + name + "'");
        auto a = std::make_shared<detail::Pipe>();
        auto b = std::make_shared<detail::Pipe>();
        auto client = std::make_unique<detail::PipeStream>(a, b);
        auto server = std::make_unique<detail::PipeStream>(b, a);
        {
            std::unique_lock lk(q->mu);
            if (q->closed) throw Error(Errc::transport_closed, "endpoint '" + name + "' closed");
            q->pending.push_back(std::move(server));
            q->cv.notify_all();
        }
        return client;
    }

private:
    std::mutex mu_;
    std::map<std::string, std::shared_ptr<detail::AcceptQueue>> queues_;
};

class LoopbackTransport : public Transport {
public:
    explicit LoopbackTransport(std::shared_ptr<LoopbackHub> hub) : hub_(std::move(hub)) {}

    std::unique_ptr<Listener> listen(const std::string& endpoint) override {
        return std::make_unique<LoopbackListener>(endpoint, hub_->open(endpoint));
    }

    std::unique_ptr<Stream> connect(const std::string& endpoint) override {
        return hub_->connect(endpoint);
    }

private:
    std::shared_ptr<LoopbackHub> hub_;
};

// ---------------------------------------------------------------------------
// TCP transport
// ---------------------------------------------------------------------------

namespace detail {

inline std::pair<std::string, std::string> split_host_port(const std::string& endpoint) {
    auto colon = endpoint.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= endpoint.size())
        throw Error(Errc::bind_error, "endpoint must be host:port, got '" + endpoint + "'");
    return {endpoint.substr(0, colon), endpoint.substr(colon + 1)};
}

class TcpStream : public Stream {
public:
    explicit TcpStream(int fd) : fd_(fd) {}
    ~TcpStream() override { close(); }

    size_t read_some(char* buf, size_t n) override {
        for (;;) {
            ssize_t r = ::recv(fd_, buf, n, 0);
            if (r > 0) return static_cast<size_t>(r);
            if (r == 0) return 0;
            if (errno == EINTR) continue;
            return 0;  // reset by peer or shut down locally: treat as EOF
        }
    }

    void write_all(const char* buf, size_t n) override {
        size_t sent = 0;
        while (sent < n) {
            ssize_t r = ::send(fd_, buf + sent, n - sent, MSG_NOSIGNAL);
            if (r < 0) {
                if (errno == EINTR) continue;
                throw Error(Errc::transport_closed, "send failed: " + std::string(strerror(errno)));
            }
            sent += static_cast<size_t>(r);
        }
    }

    void close() override {
        int fd = fd_.exchange(-1);
        if (fd >= 0) {
            ::shutdown(fd, SHUT_RDWR);
            ::close(fd);
        }
    }

private:
    std::atomic<int> fd_;
};

class TcpListener : public Listener {
public:
    TcpListener(int fd, std::string endpoint) : fd_(fd), endpoint_(std::move(endpoint)) {}
    ~TcpListener() override { close(); }

    std::unique_ptr<Stream> accept() override {
        int fd = fd_.load();
        if (fd < 0) return nullptr;
        int client = ::accept(fd, nullptr, nullptr);
        if (client < 0) return nullptr;
        return std::make_unique<TcpStream>(client);
    }

    void close() override {
        int fd = fd_.exchange(-1);
        if (fd >= 0) {
            ::shutdown(fd, SHUT_RDWR);
            ::close(fd);
        }
    }

    std::string endpoint() const override { return endpoint_; }

private:
    std::atomic<int> fd_;
    std::string endpoint_;
};

}  // namespace detail

class TcpTransport : public Transport {
public:
    std::unique_ptr<Listener> listen(const std::string& endpoint) override {
        auto [host, port] = detail::split_host_port(endpoint);
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        hints.ai_flags = AI_PASSIVE;
        addrinfo* res = nullptr;
        if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
            throw Error(Errc::bind_error, "cannot resolve '" + endpoint + "'");
        int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (fd < 0) {
            freeaddrinfo(res);
            throw Error(Errc::bind_error, "socket() failed");
        }
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 16) != 0) {
            freeaddrinfo(res);
            ::close(fd);
            throw Error(Errc::bind_error, "cannot bind '" + endpoint + "'");
        }
        freeaddrinfo(res);
        sockaddr_in actual{};
        socklen_t len = sizeof(actual);
        std::string bound = endpoint;
        if (::getsockname(fd, reinterpret_cast<sockaddr*>(&actual), &len) == 0) {
            char ip[INET_ADDRSTRLEN];
            inet_ntop(AF_INET, &actual.sin_addr, ip, sizeof(ip));
            bound = std::string(ip) + ":" + std::to_string(ntohs(actual.sin_port));
        }
        return std::make_unique<detail::TcpListener>(fd, bound);
    }

    std::unique_ptr<Stream> connect(const std::string& endpoint) override {
        auto [host, port] = detail::split_host_port(endpoint);
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
            throw Error(Errc::transport_closed, "cannot resolve '" + endpoint + "'");
        int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (fd < 0) {
            freeaddrinfo(res);
            throw Error(Errc::transport_closed, "socket() failed");
        }
        if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
            freeaddrinfo(res);
            ::close(fd);
            throw Error(Errc::transport_closed, "cannot connect to '" + endpoint + "'");
        }
        freeaddrinfo(res);
        return std::make_unique<detail::TcpStream>(fd);
    }
};

}  // namespace ppco::net
