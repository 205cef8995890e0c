#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

namespace roboplat::transport {

using Nanos = std::chrono::nanoseconds;
using namespace std::chrono_literals;

class PipeListener;

/// Single-threaded scheduler shared by every node running in one process.
/// Time is measured from the loop's creation. Timers at equal times run in
/// scheduling order.
class EventLoop {
public:
    using Task = std::function<void()>;
    using TimerId = std::uint64_t;

    virtual ~EventLoop() = default;

    virtual Nanos now() const = 0;
    virtual bool is_virtual() const = 0;

    TimerId call_at(Nanos when, Task task);
    TimerId call_after(Nanos delay, Task task) { return call_at(now() + delay, std::move(task)); }
    TimerId post(Task task) { return call_at(now(), std::move(task)); }
    void cancel(TimerId id);

    /// Runs until stop() or until no work remains.
    virtual void run() = 0;
    /// Runs events up to `deadline` (inclusive) and returns.
    virtual void run_until(Nanos deadline) = 0;
    void run_for(Nanos d) { run_until(now() + d); }
    /// Runs until `done()` holds, stop() is called, or `limit` is reached.
    /// Returns done().
    bool run_until_condition(const std::function<bool()>& done, Nanos limit);

    void stop() { stop_requested_ = true; }
    bool stop_requested() const { return stop_requested_; }
    void clear_stop() { stop_requested_ = false; }

    std::size_t pending_timers() const { return timers_.size(); }

    // In-process listener registry for pipe endpoints.
    void register_pipe(const std::string& label, PipeListener* listener);
    void unregister_pipe(const std::string& label, PipeListener* listener);
    PipeListener* find_pipe(const std::string& label) const;

protected:
    struct Key {
        Nanos when;
        std::uint64_t seq;
        bool operator<(const Key& o) const { return when != o.when ? when < o.when : seq < o.seq; }
    };

    bool has_due(Nanos t) const { return !timers_.empty() && timers_.begin()->first.when <= t; }
    std::optional<Nanos> next_deadline() const;
    /// Pops and runs the earliest timer. Returns its scheduled time.
    Nanos run_next();

    std::atomic<bool> stop_requested_{false};

private:
    std::map<Key, Task> timers_;
    std::unordered_map<TimerId, Key> index_;
    std::uint64_t next_seq_{1};
    std::map<std::string, PipeListener*> pipes_;
};

/// Discrete-event loop on a virtual clock: time jumps straight to the next
/// scheduled event, so runs are exactly reproducible.
class SimLoop final : public EventLoop {
public:
    Nanos now() const override { return now_; }
    bool is_virtual() const override { return true; }

    void run() override;
    void run_until(Nanos deadline) override;

private:
    Nanos now_{0};
};

/// Wall-clock loop multiplexing file descriptors with poll(2).
class PollLoop final : public EventLoop {
public:
    using FdHandler = std::function<void(short revents)>;

    PollLoop();
    ~PollLoop() override;
    PollLoop(const PollLoop&) = delete;
    PollLoop& operator=(const PollLoop&) = delete;

    Nanos now() const override;
    bool is_virtual() const override { return false; }

    void run() override;
    void run_until(Nanos deadline) override;

    /// Watches `fd` for `events` (POLLIN/POLLOUT). Replaces any prior watch.
    void watch(int fd, short events, FdHandler handler);
    void set_events(int fd, short events);
    void unwatch(int fd);

    /// Async-signal-safe: wakes the loop and requests stop.
    void request_stop_from_signal();

private:
    void poll_once(Nanos deadline);

    struct Watch {
        short events;
        std::shared_ptr<FdHandler> handler;
    };

    std::chrono::steady_clock::time_point epoch_;
    std::map<int, Watch> watches_;
    int wake_pipe_[2]{-1, -1};
};

}  // namespace roboplat::transport
