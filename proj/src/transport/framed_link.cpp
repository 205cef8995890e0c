#include "roboplat/transport/framed_link.hpp"

namespace roboplat::transport {

FramedLink::FramedLink(ConnectionPtr conn, MessageHandler on_message, CloseHandler on_close)
    : conn_(std::move(conn)),
      on_message_(std::move(on_message)),
      on_close_(std::move(on_close)),
      alive_(std::make_shared<bool>(true)) {
    conn_->set_data_handler([this](std::span<const std::uint8_t> bytes) { on_bytes(bytes); });
    close_id_ = conn_->add_close_handler([this] {
        if (on_close_) on_close_();
    });
}

FramedLink::~FramedLink() {
    *alive_ = false;
    conn_->set_data_handler(nullptr);
    conn_->remove_close_handler(close_id_);
}

void FramedLink::send(const protocol::Message& msg) { conn_->send(protocol::encode(msg)); }

void FramedLink::close() { conn_->close(); }

void FramedLink::on_bytes(std::span<const std::uint8_t> bytes) {
    auto alive = alive_;
    auto keep = conn_;
    decoder_.feed(bytes);
    while (*alive && conn_->is_open()) {
        auto msg = decoder_.next();
        if (!msg) break;
        if (on_message_) on_message_(*msg);
    }
}

}  // namespace roboplat::transport
