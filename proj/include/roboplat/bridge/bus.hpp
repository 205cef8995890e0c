#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "roboplat/dataset/records.hpp"
#include "roboplat/protocol/messages.hpp"
#include "roboplat/transport/event_loop.hpp"

namespace roboplat::bridge {

using Payload = std::variant<protocol::Message, dataset::SensorRecord>;

struct BusMessage {
    std::string topic;
    Payload payload;
    transport::Nanos published_at{0};
};

inline constexpr std::size_t kDefaultQueueBound = 1024;

/// Bounded FIFO owned by one subscriber. When full, the oldest entry is
/// dropped and counted.
class Subscription {
public:
    explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

    std::optional<BusMessage> pop();
    std::size_t size() const { return queue_.size(); }
    std::uint64_t dropped() const { return dropped_; }

    /// Called after each message is queued; typically drains the queue.
    void set_notify(std::function<void()> fn) { notify_ = std::move(fn); }

private:
    friend class Bus;
    void push(const BusMessage& m);

    std::size_t capacity_;
    std::deque<BusMessage> queue_;
    std::uint64_t dropped_{0};
    std::function<void()> notify_;
};

/// In-process publish/subscribe by topic. Subscribers see messages published
/// after they subscribed, in publish order. Dropping the returned handle
/// unsubscribes.
class Bus {
public:
    std::shared_ptr<Subscription> subscribe(const std::string& topic, std::size_t capacity = kDefaultQueueBound);
    void publish(const std::string& topic, Payload payload, transport::Nanos t);

    std::uint64_t published() const { return published_; }

private:
    std::map<std::string, std::vector<std::weak_ptr<Subscription>>> subs_;
    std::uint64_t published_{0};
};

}  // namespace roboplat::bridge
