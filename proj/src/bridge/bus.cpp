#include "roboplat/bridge/bus.hpp"

#include <algorithm>

namespace roboplat::bridge {

std::optional<BusMessage> Subscription::pop() {
    if (queue_.empty()) return std::nullopt;
    auto m = std::move(queue_.front());
    queue_.pop_front();
    return m;
}

void Subscription::push(const BusMessage& m) {
    if (capacity_ == 0) {
        ++dropped_;
        return;
    }
    if (queue_.size() == capacity_) {
        queue_.pop_front();
        ++dropped_;
    }
    queue_.push_back(m);
}

std::shared_ptr<Subscription> Bus::subscribe(const std::string& topic, std::size_t capacity) {
    auto s = std::make_shared<Subscription>(capacity);
    subs_[topic].push_back(s);
    return s;
}

void Bus::publish(const std::string& topic, Payload payload, transport::Nanos t) {
    ++published_;
    const auto it = subs_.find(topic);
    if (it == subs_.end()) return;
    const BusMessage msg{topic, std::move(payload), t};
    auto& list = it->second;
    std::erase_if(list, [](const auto& w) { return w.expired(); });
    // Copy so a notify handler may subscribe or unsubscribe safely.
    std::vector<std::shared_ptr<Subscription>> live;
    for (const auto& w : list)
        if (auto s = w.lock()) live.push_back(std::move(s));
    for (const auto& s : live) s->push(msg);
    for (const auto& s : live)
        if (s->notify_) s->notify_();
}

}  // namespace roboplat::bridge
