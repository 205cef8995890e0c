#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "roboplat/transport/event_loop.hpp"

namespace roboplat::transport {

using Bytes = std::vector<std::uint8_t>;

enum class TransportErrorCode { BindFailure, AcceptFailure, ConnectRefused, Timeout, BadEndpoint, Unsupported };

const char* transport_error_name(TransportErrorCode c);

class TransportError : public std::runtime_error {
public:
    TransportError(TransportErrorCode code, const std::string& what)
        : std::runtime_error(std::string(transport_error_name(code)) + ": " + what), code_(code) {}
    TransportErrorCode code() const { return code_; }

private:
    TransportErrorCode code_;
};

/// Reliable, ordered, bidirectional byte stream. Handlers run on the owning
/// loop. Bytes that arrive before a data handler is installed are held and
/// delivered once one is set.
class Connection : public std::enable_shared_from_this<Connection> {
public:
    using DataHandler = std::function<void(std::span<const std::uint8_t>)>;
    using CloseHandler = std::function<void()>;
    using HandlerId = std::uint64_t;

    explicit Connection(EventLoop& loop, std::string label) : loop_(loop), label_(std::move(label)) {}
    virtual ~Connection() = default;
    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    /// Queues bytes for the peer. Ignored once closed.
    virtual void send(std::span<const std::uint8_t> bytes) = 0;
    /// Closes both directions. Local close handlers run immediately; the peer
    /// observes the close after any bytes already sent.
    virtual void close() = 0;

    bool is_open() const { return open_; }
    EventLoop& loop() const { return loop_; }
    const std::string& label() const { return label_; }

    void set_data_handler(DataHandler h);
    HandlerId add_close_handler(CloseHandler h);
    void remove_close_handler(HandlerId id);

    std::uint64_t bytes_sent() const { return bytes_sent_; }
    std::uint64_t bytes_received() const { return bytes_received_; }

protected:
    void deliver(std::span<const std::uint8_t> bytes);
    /// Marks the connection closed and runs close handlers once.
    void mark_closed();
    void count_sent(std::size_t n) { bytes_sent_ += n; }

    EventLoop& loop_;

private:
    std::string label_;
    bool open_{true};
    DataHandler on_data_;
    Bytes held_;
    std::vector<std::pair<HandlerId, CloseHandler>> on_close_;
    HandlerId next_handler_{1};
    std::uint64_t bytes_sent_{0};
    std::uint64_t bytes_received_{0};
};

using ConnectionPtr = std::shared_ptr<Connection>;

/// In-process connection pair. Every send is delivered to the peer through
/// the loop, never synchronously.
std::pair<ConnectionPtr, ConnectionPtr> make_pipe(EventLoop& loop, const std::string& label_a = "pipe:a",
                                                  const std::string& label_b = "pipe:b");

}  // namespace roboplat::transport
