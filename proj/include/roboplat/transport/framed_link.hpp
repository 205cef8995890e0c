#pragma once

#include <functional>
#include <memory>

#include "roboplat/protocol/codec.hpp"
#include "roboplat/transport/connection.hpp"

namespace roboplat::transport {

/// Message-level view of a connection: encodes outgoing messages and runs
/// incoming bytes through a FrameDecoder. Handlers may destroy the link.
class FramedLink {
public:
    using MessageHandler = std::function<void(const protocol::Message&)>;
    using CloseHandler = std::function<void()>;

    FramedLink(ConnectionPtr conn, MessageHandler on_message, CloseHandler on_close = {});
    ~FramedLink();
    FramedLink(const FramedLink&) = delete;
    FramedLink& operator=(const FramedLink&) = delete;

    /// Encodes and sends. Throws protocol::ProtocolError for invalid messages.
    void send(const protocol::Message& msg);
    void close();
    bool is_open() const { return conn_->is_open(); }

    const protocol::DecoderStats& stats() const { return decoder_.stats(); }
    const ConnectionPtr& connection() const { return conn_; }

private:
    void on_bytes(std::span<const std::uint8_t> bytes);

    ConnectionPtr conn_;
    MessageHandler on_message_;
    CloseHandler on_close_;
    protocol::FrameDecoder decoder_;
    Connection::HandlerId close_id_{0};
    std::shared_ptr<bool> alive_;
};

}  // namespace roboplat::transport
