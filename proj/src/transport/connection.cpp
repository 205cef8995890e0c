#include "roboplat/transport/connection.hpp"

#include <algorithm>

namespace roboplat::transport {

const char* transport_error_name(TransportErrorCode c) {
    switch (c) {
        case TransportErrorCode::BindFailure: return "BindFailure";
        case TransportErrorCode::AcceptFailure: return "AcceptFailure";
        case TransportErrorCode::ConnectRefused: return "ConnectRefused";
        case TransportErrorCode::Timeout: return "Timeout";
        case TransportErrorCode::BadEndpoint: return "BadEndpoint";
        case TransportErrorCode::Unsupported: return "Unsupported";
    }
    return "Unknown";
}

void Connection::set_data_handler(DataHandler h) {
    on_data_ = std::move(h);
    if (on_data_ && !held_.empty()) {
        // Hand the held bytes over asynchronously so the caller finishes its
        // setup first.
        loop_.post([weak = weak_from_this()] {
            auto self = weak.lock();
            if (!self || !self->on_data_ || self->held_.empty()) return;
            Bytes pending;
            pending.swap(self->held_);
            self->on_data_(pending);
        });
    }
}

Connection::HandlerId Connection::add_close_handler(CloseHandler h) {
    const HandlerId id = next_handler_++;
    on_close_.emplace_back(id, std::move(h));
    return id;
}

void Connection::remove_close_handler(HandlerId id) {
    std::erase_if(on_close_, [id](const auto& p) { return p.first == id; });
}

void Connection::deliver(std::span<const std::uint8_t> bytes) {
    if (!open_ || bytes.empty()) return;
    bytes_received_ += bytes.size();
    if (on_data_ && held_.empty()) {
        on_data_(bytes);
    } else {
        held_.insert(held_.end(), bytes.begin(), bytes.end());
    }
}

void Connection::mark_closed() {
    if (!open_) return;
    open_ = false;
    auto keep = shared_from_this();
    auto handlers = std::move(on_close_);
    on_close_.clear();
    for (auto& [id, h] : handlers)
        if (h) h();
}

namespace {

class PipeConnection final : public Connection {
public:
    using Connection::Connection;

    void attach(const std::shared_ptr<PipeConnection>& peer) { peer_ = peer; }

    void send(std::span<const std::uint8_t> bytes) override {
        if (!is_open() || bytes.empty()) return;
        count_sent(bytes.size());
        loop_.post([peer = peer_, data = Bytes(bytes.begin(), bytes.end())] {
            if (auto p = peer.lock()) p->deliver(data);
        });
    }

    void close() override {
        if (!is_open()) return;
        loop_.post([peer = peer_] {
            if (auto p = peer.lock()) p->mark_closed();
        });
        mark_closed();
    }

    ~PipeConnection() override {
        if (is_open()) {
            loop_.post([peer = peer_] {
                if (auto p = peer.lock()) p->mark_closed();
            });
        }
    }

private:
    std::weak_ptr<PipeConnection> peer_;
};

}  // namespace

std::pair<ConnectionPtr, ConnectionPtr> make_pipe(EventLoop& loop, const std::string& label_a,
                                                  const std::string& label_b) {
    auto a = std::make_shared<PipeConnection>(loop, label_a);
    auto b = std::make_shared<PipeConnection>(loop, label_b);
    a->attach(b);
    b->attach(a);
    return {a, b};
}

}  // namespace roboplat::transport
