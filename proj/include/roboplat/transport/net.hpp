#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "roboplat/transport/connection.hpp"

namespace roboplat::transport {

struct Endpoint {
    enum class Kind { Tcp, Pipe };

    Kind kind{Kind::Tcp};
    std::string host;        // tcp; empty means any (listen) or loopback (connect)
    std::uint16_t port{0};   // tcp; 0 only for listening on an ephemeral port
    std::string label;       // pipe

    /// Accepts "host:port", ":port", "tcp://host:port" and "pipe:<label>".
    /// Throws TransportError(BadEndpoint).
    static Endpoint parse(std::string_view text);
    static Endpoint tcp(std::string host, std::uint16_t port);
    static Endpoint pipe(std::string label);

    std::string to_string() const;
    bool operator==(const Endpoint&) const = default;
};

struct ListenOptions {
    /// 0 means unlimited.
    std::size_t max_clients{0};
    /// Bytes sent to a refused connector before it is closed.
    Bytes busy_notice;
};

using AcceptHandler = std::function<void(ConnectionPtr)>;

class Listener {
public:
    virtual ~Listener() = default;
    virtual Endpoint address() const = 0;
    virtual void close() = 0;

    std::size_t active() const { return state_->active; }
    std::uint64_t accepted() const { return state_->accepted; }
    std::uint64_t refused() const { return state_->refused; }

protected:
    Listener(AcceptHandler on_accept, ListenOptions options);
    /// Applies the client limit, then hands the connection to the handler.
    void admit(const ConnectionPtr& conn);

private:
    struct State {
        std::size_t active{0};
        std::uint64_t accepted{0};
        std::uint64_t refused{0};
    };
    AcceptHandler on_accept_;
    ListenOptions options_;
    std::shared_ptr<State> state_;
};

/// Listener for in-process pipe endpoints. Found by label through the loop.
class PipeListener final : public Listener {
public:
    PipeListener(EventLoop& loop, std::string label, AcceptHandler on_accept, ListenOptions options);
    ~PipeListener() override;

    Endpoint address() const override { return Endpoint::pipe(label_); }
    void close() override;

    /// Creates a pair, schedules admission of the server end and returns the
    /// client end.
    ConnectionPtr connect_client();

private:
    EventLoop& loop_;
    std::string label_;
    bool open_{true};
    std::shared_ptr<bool> alive_;
};

/// Binds and starts accepting. TCP endpoints need a PollLoop.
/// Throws TransportError(BindFailure | Unsupported).
std::unique_ptr<Listener> listen(EventLoop& loop, const Endpoint& ep, AcceptHandler on_accept,
                                 ListenOptions options = {});

/// Opens a channel to a listening endpoint. Throws
/// TransportError(ConnectRefused | Timeout | Unsupported | BadEndpoint).
ConnectionPtr connect(EventLoop& loop, const Endpoint& ep, Nanos timeout = Nanos(5s));

}  // namespace roboplat::transport
