#include "roboplat/transport/event_loop.hpp"

#include <fcntl.h>
#include <poll.h>
#include <unistd.h>

#include <cerrno>
#include <system_error>
#include <vector>

namespace roboplat::transport {

EventLoop::TimerId EventLoop::call_at(Nanos when, Task task) {
    if (when < now()) when = now();
    const Key key{when, next_seq_++};
    timers_.emplace(key, std::move(task));
    index_.emplace(key.seq, key);
    return key.seq;
}

void EventLoop::cancel(TimerId id) {
    const auto it = index_.find(id);
    if (it == index_.end()) return;
    timers_.erase(it->second);
    index_.erase(it);
}

std::optional<Nanos> EventLoop::next_deadline() const {
    if (timers_.empty()) return std::nullopt;
    return timers_.begin()->first.when;
}

Nanos EventLoop::run_next() {
    auto node = timers_.extract(timers_.begin());
    index_.erase(node.key().seq);
    const Nanos when = node.key().when;
    node.mapped()();
    return when;
}

bool EventLoop::run_until_condition(const std::function<bool()>& done, Nanos limit) {
    while (!done() && !stop_requested() && now() < limit) {
        if (is_virtual()) {
            const auto next = next_deadline();
            if (!next || *next > limit) break;
            run_until(*next);
        } else {
            run_until(std::min(limit, now() + Nanos(5ms)));
        }
    }
    return done();
}

void EventLoop::register_pipe(const std::string& label, PipeListener* listener) { pipes_[label] = listener; }

void EventLoop::unregister_pipe(const std::string& label, PipeListener* listener) {
    const auto it = pipes_.find(label);
    if (it != pipes_.end() && it->second == listener) pipes_.erase(it);
}

PipeListener* EventLoop::find_pipe(const std::string& label) const {
    const auto it = pipes_.find(label);
    return it == pipes_.end() ? nullptr : it->second;
}

// ---------------------------------------------------------------- SimLoop

void SimLoop::run() {
    while (!stop_requested()) {
        const auto next = next_deadline();
        if (!next) break;
        now_ = std::max(now_, *next);
        run_next();
    }
}

void SimLoop::run_until(Nanos deadline) {
    while (!stop_requested() && has_due(deadline)) {
        now_ = std::max(now_, *next_deadline());
        run_next();
    }
    if (!stop_requested()) now_ = std::max(now_, deadline);
}

// --------------------------------------------------------------- PollLoop

PollLoop::PollLoop() : epoch_(std::chrono::steady_clock::now()) {
    if (::pipe2(wake_pipe_, O_NONBLOCK | O_CLOEXEC) != 0)
        throw std::system_error(errno, std::generic_category(), "pipe2");
}

PollLoop::~PollLoop() {
    ::close(wake_pipe_[0]);
    ::close(wake_pipe_[1]);
}

Nanos PollLoop::now() const {
    return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now() - epoch_);
}

void PollLoop::watch(int fd, short events, FdHandler handler) {
    watches_[fd] = Watch{events, std::make_shared<FdHandler>(std::move(handler))};
}

void PollLoop::set_events(int fd, short events) {
    const auto it = watches_.find(fd);
    if (it != watches_.end()) it->second.events = events;
}

void PollLoop::unwatch(int fd) { watches_.erase(fd); }

void PollLoop::request_stop_from_signal() {
    stop_requested_ = true;
    const char b = 1;
    [[maybe_unused]] auto n = ::write(wake_pipe_[1], &b, 1);
}

void PollLoop::poll_once(Nanos deadline) {
    std::vector<pollfd> fds;
    fds.reserve(watches_.size() + 1);
    fds.push_back(pollfd{wake_pipe_[0], POLLIN, 0});
    for (const auto& [fd, w] : watches_) fds.push_back(pollfd{fd, w.events, 0});

    Nanos until = deadline;
    if (const auto next = next_deadline()) until = std::min(until, *next);
    const Nanos wait = until - now();
    int timeout_ms = 0;
    if (wait > Nanos::zero()) {
        const auto ms = std::chrono::ceil<std::chrono::milliseconds>(wait).count();
        timeout_ms = static_cast<int>(std::min<long long>(ms, 1000));
    }

    const int n = ::poll(fds.data(), fds.size(), timeout_ms);
    if (n < 0) {
        if (errno == EINTR) return;
        throw std::system_error(errno, std::generic_category(), "poll");
    }
    if (n > 0) {
        if (fds[0].revents) {
            char buf[64];
            while (::read(wake_pipe_[0], buf, sizeof buf) > 0) {
            }
        }
        for (std::size_t i = 1; i < fds.size(); ++i) {
            if (!fds[i].revents) continue;
            const auto it = watches_.find(fds[i].fd);
            if (it == watches_.end()) continue;  // removed by an earlier handler
            auto handler = it->second.handler;
            (*handler)(fds[i].revents);
            if (stop_requested()) return;
        }
    }
    const Nanos t = now();
    while (!stop_requested() && has_due(t)) run_next();
}

void PollLoop::run() {
    while (!stop_requested()) {
        if (watches_.empty() && !next_deadline()) break;
        poll_once(now() + Nanos(1s));
    }
}

void PollLoop::run_until(Nanos deadline) {
    while (!stop_requested() && now() < deadline) poll_once(deadline);
    while (!stop_requested() && has_due(now())) run_next();
}

}  // namespace roboplat::transport
