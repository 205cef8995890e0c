#include "roboplat/transport/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace roboplat::transport {

// ---------------------------------------------------------------- Listener

Listener::Listener(AcceptHandler on_accept, ListenOptions options)
    : on_accept_(std::move(on_accept)), options_(std::move(options)), state_(std::make_shared<State>()) {}

void Listener::admit(const ConnectionPtr& conn) {
    if (options_.max_clients != 0 && state_->active >= options_.max_clients) {
        ++state_->refused;
        if (!options_.busy_notice.empty()) conn->send(options_.busy_notice);
        conn->close();
        return;
    }
    ++state_->active;
    ++state_->accepted;
    conn->add_close_handler([state = state_] { --state->active; });
    if (on_accept_) on_accept_(conn);
}

// ------------------------------------------------------------ PipeListener

PipeListener::PipeListener(EventLoop& loop, std::string label, AcceptHandler on_accept, ListenOptions options)
    : Listener(std::move(on_accept), std::move(options)),
      loop_(loop),
      label_(std::move(label)),
      alive_(std::make_shared<bool>(true)) {
    if (loop_.find_pipe(label_))
        throw TransportError(TransportErrorCode::BindFailure, "pipe label in use: " + label_);
    loop_.register_pipe(label_, this);
}

PipeListener::~PipeListener() {
    *alive_ = false;
    close();
}

void PipeListener::close() {
    if (!open_) return;
    open_ = false;
    loop_.unregister_pipe(label_, this);
}

ConnectionPtr PipeListener::connect_client() {
    auto [client, server] = make_pipe(loop_, "pipe:" + label_ + "#client", "pipe:" + label_ + "#server");
    loop_.post([this, alive = alive_, server = server] {
        if (!*alive || !open_) {
            server->close();
            return;
        }
        admit(server);
    });
    return client;
}

// ----------------------------------------------------------- TcpConnection

namespace {

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

std::string peer_name(int fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getpeername(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) return "tcp:?";
    char buf[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
    return std::string(buf) + ":" + std::to_string(ntohs(addr.sin_port));
}

class TcpConnection final : public Connection {
public:
    TcpConnection(PollLoop& loop, int fd, std::string label)
        : Connection(loop, std::move(label)), ploop_(loop), fd_(fd) {}

    ~TcpConnection() override { release(); }

    static std::shared_ptr<TcpConnection> adopt(PollLoop& loop, int fd) {
        set_nonblocking(fd);
        set_nodelay(fd);
        auto c = std::make_shared<TcpConnection>(loop, fd, peer_name(fd));
        loop.watch(fd, POLLIN, [weak = std::weak_ptr<TcpConnection>(c)](short ev) {
            if (auto self = weak.lock()) self->on_event(ev);
        });
        return c;
    }

    void send(std::span<const std::uint8_t> bytes) override {
        if (!is_open() || bytes.empty()) return;
        count_sent(bytes.size());
        std::size_t done = 0;
        if (out_.size() == out_pos_) {
            out_.clear();
            out_pos_ = 0;
            while (done < bytes.size()) {
                const auto n = ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
                if (n > 0) {
                    done += static_cast<std::size_t>(n);
                    continue;
                }
                if (n < 0 && errno == EINTR) continue;
                if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
                fail();
                return;
            }
        }
        if (done < bytes.size()) {
            out_.insert(out_.end(), bytes.begin() + static_cast<std::ptrdiff_t>(done), bytes.end());
            ploop_.set_events(fd_, POLLIN | POLLOUT);
        }
    }

    void close() override {
        if (!is_open()) return;
        closing_ = true;
        if (out_pos_ != out_.size()) keep_alive_ = std::static_pointer_cast<TcpConnection>(shared_from_this());
        mark_closed();
        if (out_pos_ == out_.size()) {
            release();
        } else {
            ploop_.set_events(fd_, POLLOUT);
        }
    }

private:
    void on_event(short ev) {
        if (fd_ < 0) return;
        if (ev & POLLOUT) {
            if (!flush()) return;
        }
        if (closing_) {
            if (out_pos_ == out_.size() || (ev & (POLLERR | POLLHUP))) release();
            return;
        }
        if (ev & (POLLIN | POLLHUP | POLLERR)) read_all();
    }

    // Returns false if the connection failed.
    bool flush() {
        while (out_pos_ < out_.size()) {
            const auto n = ::send(fd_, out_.data() + out_pos_, out_.size() - out_pos_, MSG_NOSIGNAL);
            if (n > 0) {
                out_pos_ += static_cast<std::size_t>(n);
                continue;
            }
            if (n < 0 && errno == EINTR) continue;
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return true;
            fail();
            return false;
        }
        out_.clear();
        out_pos_ = 0;
        if (!closing_) ploop_.set_events(fd_, POLLIN);
        return true;
    }

    void read_all() {
        std::uint8_t buf[16384];
        while (fd_ >= 0 && is_open()) {
            const auto n = ::recv(fd_, buf, sizeof buf, 0);
            if (n > 0) {
                deliver(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
                continue;
            }
            if (n < 0 && errno == EINTR) continue;
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return;
            fail();
            return;
        }
    }

    void fail() {
        release();
        mark_closed();
    }

    void release() {
        if (fd_ < 0) return;
        ploop_.unwatch(fd_);
        ::close(fd_);
        fd_ = -1;
        keep_alive_.reset();
    }

    PollLoop& ploop_;
    int fd_;
    Bytes out_;
    std::size_t out_pos_{0};
    bool closing_{false};
    std::shared_ptr<TcpConnection> keep_alive_;  // held while draining after close()
};

// ------------------------------------------------------------- TcpListener

class TcpListener final : public Listener {
public:
    TcpListener(PollLoop& loop, const Endpoint& ep, AcceptHandler on_accept, ListenOptions options)
        : Listener(std::move(on_accept), std::move(options)), loop_(loop) {
        fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
        if (fd_ < 0) throw TransportError(TransportErrorCode::BindFailure, std::strerror(errno));
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        const std::string host = ep.host.empty() ? "0.0.0.0" : (ep.host == "localhost" ? "127.0.0.1" : ep.host);
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            ::close(fd_);
            throw TransportError(TransportErrorCode::BindFailure, "bad listen address " + host);
        }
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 16) != 0) {
            const std::string err = std::strerror(errno);
            ::close(fd_);
            throw TransportError(TransportErrorCode::BindFailure, ep.to_string() + ": " + err);
        }
        socklen_t len = sizeof addr;
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        bound_ = Endpoint::tcp(host, ntohs(addr.sin_port));
        loop_.watch(fd_, POLLIN, [this](short) { accept_all(); });
    }

    ~TcpListener() override { close(); }

    Endpoint address() const override { return bound_; }

    void close() override {
        if (fd_ < 0) return;
        loop_.unwatch(fd_);
        ::close(fd_);
        fd_ = -1;
    }

private:
    void accept_all() {
        while (fd_ >= 0) {
            const int c = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
            if (c < 0) {
                if (errno == EINTR || errno == ECONNABORTED) continue;
                if (errno == EAGAIN || errno == EWOULDBLOCK) return;
                throw TransportError(TransportErrorCode::AcceptFailure, std::strerror(errno));
            }
            admit(TcpConnection::adopt(loop_, c));
        }
    }

    PollLoop& loop_;
    int fd_{-1};
    Endpoint bound_;
};

PollLoop& require_poll_loop(EventLoop& loop) {
    auto* p = dynamic_cast<PollLoop*>(&loop);
    if (!p) throw TransportError(TransportErrorCode::Unsupported, "tcp endpoints need a wall-clock loop");
    return *p;
}

ConnectionPtr connect_tcp(PollLoop& loop, const Endpoint& ep, Nanos timeout) {
    if (ep.port == 0) throw TransportError(TransportErrorCode::BadEndpoint, "port 0");
    const std::string host = ep.host.empty() ? "127.0.0.1" : ep.host;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(ep.port).c_str(), &hints, &res) != 0 || !res)
        throw TransportError(TransportErrorCode::BadEndpoint, "cannot resolve " + host);
    const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
    const int rc = fd < 0 ? -1 : ::connect(fd, res->ai_addr, res->ai_addrlen);
    const int connect_errno = errno;
    ::freeaddrinfo(res);
    if (fd < 0) throw TransportError(TransportErrorCode::ConnectRefused, std::strerror(connect_errno));
    if (rc != 0 && connect_errno != EINPROGRESS) {
        ::close(fd);
        throw TransportError(TransportErrorCode::ConnectRefused, ep.to_string() + ": " + std::strerror(connect_errno));
    }
    if (rc != 0) {
        pollfd p{fd, POLLOUT, 0};
        const int ms = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(timeout).count());
        int n;
        do {
            n = ::poll(&p, 1, ms);
        } while (n < 0 && errno == EINTR);
        if (n == 0) {
            ::close(fd);
            throw TransportError(TransportErrorCode::Timeout, ep.to_string());
        }
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            ::close(fd);
            throw TransportError(err == ETIMEDOUT ? TransportErrorCode::Timeout : TransportErrorCode::ConnectRefused,
                                 ep.to_string() + ": " + std::strerror(err));
        }
    }
    return TcpConnection::adopt(loop, fd);
}

}  // namespace

std::unique_ptr<Listener> listen(EventLoop& loop, const Endpoint& ep, AcceptHandler on_accept,
                                 ListenOptions options) {
    if (ep.kind == Endpoint::Kind::Pipe)
        return std::make_unique<PipeListener>(loop, ep.label, std::move(on_accept), std::move(options));
    return std::make_unique<TcpListener>(require_poll_loop(loop), ep, std::move(on_accept), std::move(options));
}

ConnectionPtr connect(EventLoop& loop, const Endpoint& ep, Nanos timeout) {
    if (ep.kind == Endpoint::Kind::Pipe) {
        auto* l = loop.find_pipe(ep.label);
        if (!l) throw TransportError(TransportErrorCode::ConnectRefused, "no listener on pipe:" + ep.label);
        return l->connect_client();
    }
    return connect_tcp(require_poll_loop(loop), ep, timeout);
}

}  // namespace roboplat::transport
