#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "roboplat/commbench/bench.hpp"
#include "roboplat/transport/framed_link.hpp"
#include "roboplat/transport/net.hpp"

namespace roboplat::station {

using transport::Nanos;

enum class Phase { Listening, Handshaking, Ready };
const char* phase_name(Phase p);

enum class SubmitStatus { Accepted, NotConnected, NotVerified, BadValue };
const char* submit_status_name(SubmitStatus s);

inline constexpr std::size_t kChallengeSize = 16;
inline constexpr std::uint16_t kMaxPwm = 1000;

struct LogEntry {
    Nanos at{0};
    protocol::Message command;
};

struct StationEvent {
    Nanos at{0};
    std::string text;
};

struct StationOptions {
    transport::Endpoint control;
    std::optional<transport::Endpoint> ui;
    double telemetry_rate_hz{20.0};  // per UI session
    std::size_t log_capacity{1024};
    Nanos handshake_timeout{std::chrono::seconds(5)};
    /// Challenge generator seed; nullopt draws from std::random_device.
    std::optional<std::uint64_t> seed;
    Nanos probe_timeout{std::chrono::seconds(2)};
};

struct StationCounters {
    std::uint64_t clients_accepted{0};
    std::uint64_t handshakes_ok{0};
    std::uint64_t handshake_failures{0};
    std::uint64_t commands_sent{0};
    std::uint64_t commands_rejected{0};
    std::uint64_t telemetry_received{0};
    std::uint64_t ui_telemetry_sent{0};
    std::uint64_t ui_errors{0};
};

/// Control server: one bridge client at a time, gated by the challenge
/// handshake, plus any number of JSON UI sessions.
class Station {
public:
    /// Binds the control and UI listeners. Throws transport::TransportError.
    Station(transport::EventLoop& loop, StationOptions opts);
    ~Station();
    Station(const Station&) = delete;
    Station& operator=(const Station&) = delete;

    Phase phase() const { return phase_; }
    bool connected() const { return phase_ != Phase::Listening; }
    bool verified() const { return phase_ == Phase::Ready; }

    /// The only path to the wire for commands. Logs accepted commands.
    SubmitStatus submit_command(const protocol::Message& cmd);

    /// Starts a sequential latency test over the control link. Returns false
    /// if not verified or a test is already running.
    bool run_latency_test(const commbench::LatencyOptions& opts,
                          std::function<void(const commbench::LatencyResult&)> done);

    /// Drops the client and UI sessions and closes the listeners.
    void stop();
    bool stopped() const { return stopped_; }

    const std::deque<LogEntry>& command_log() const { return log_; }
    const std::deque<StationEvent>& events() const { return events_; }
    const std::optional<protocol::Telemetry>& last_telemetry() const { return telemetry_; }
    const std::optional<protocol::ConfigResponse>& device_config() const { return config_; }
    const StationCounters& counters() const { return counters_; }
    std::size_t ui_session_count() const { return sessions_.size(); }
    std::uint64_t clients_refused() const;

    transport::Endpoint control_address() const;
    std::optional<transport::Endpoint> ui_address() const;

    void set_on_verified(std::function<void()> fn) { on_verified_ = std::move(fn); }
    void set_on_disconnected(std::function<void()> fn) { on_disconnected_ = std::move(fn); }
    void set_on_event(std::function<void(const StationEvent&)> fn) { on_event_ = std::move(fn); }

private:
    struct UiSession;

    void on_client(transport::ConnectionPtr conn);
    void on_message(const protocol::Message& m);
    void on_client_closed();
    void drop_client(const std::string& why);
    void log_event(std::string text);

    void on_ui(transport::ConnectionPtr conn);
    void on_ui_bytes(std::uint64_t id, std::span<const std::uint8_t> bytes);
    void on_ui_line(std::uint64_t id, const std::string& line);
    void ui_send(UiSession& s, const std::string& line);
    void broadcast_status();
    void offer_telemetry(UiSession& s);
    void flush_telemetry(std::uint64_t id);

    transport::EventLoop& loop_;
    StationOptions opts_;
    std::shared_ptr<bool> alive_;
    std::mt19937_64 rng_;

    std::unique_ptr<transport::Listener> control_listener_;
    std::unique_ptr<transport::Listener> ui_listener_;

    Phase phase_{Phase::Listening};
    std::unique_ptr<transport::FramedLink> link_;
    std::uint64_t client_gen_{0};
    protocol::Bytes challenge_;
    std::optional<transport::EventLoop::TimerId> handshake_timer_;
    std::unique_ptr<commbench::BenchClient> bench_;

    std::deque<LogEntry> log_;
    std::deque<StationEvent> events_;
    std::optional<protocol::Telemetry> telemetry_;
    std::optional<protocol::ConfigResponse> config_;
    StationCounters counters_;

    std::map<std::uint64_t, std::unique_ptr<UiSession>> sessions_;
    std::uint64_t next_session_{1};
    bool stopped_{false};

    std::function<void()> on_verified_;
    std::function<void()> on_disconnected_;
    std::function<void(const StationEvent&)> on_event_;
};

// ------------------------------------------------------------------ scripts

class ScriptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One scripted action, relative to handshake verification. A step without a
/// command ends the session.
struct ScriptStep {
    Nanos at{0};
    std::optional<protocol::Message> command;
};

/// JSON lines, one step each, times non-decreasing:
///   {"t_ms":0,"type":"digital","line":0,"value":1}
///   {"t_ms":500,"type":"pwm","values":[500,500,500,500]}
///   {"t_ms":2000,"type":"end"}
/// Blank lines and lines starting with '#' are skipped.
std::vector<ScriptStep> parse_script(std::istream& in);
std::vector<ScriptStep> load_script(const std::filesystem::path& file);

/// Replays a script once the station verifies its client.
class ScriptRunner {
public:
    ScriptRunner(transport::EventLoop& loop, Station& station, std::vector<ScriptStep> steps,
                 std::function<void()> on_end = {});
    ~ScriptRunner();
    ScriptRunner(const ScriptRunner&) = delete;
    ScriptRunner& operator=(const ScriptRunner&) = delete;

    bool started() const { return started_; }
    bool done() const { return done_; }
    /// Status of each step's submission, in order; end steps are not listed.
    const std::vector<SubmitStatus>& results() const { return results_; }

private:
    void begin();
    void step(std::size_t i);

    transport::EventLoop& loop_;
    Station& station_;
    std::vector<ScriptStep> steps_;
    std::function<void()> on_end_;
    std::shared_ptr<bool> alive_;
    std::vector<transport::EventLoop::TimerId> timers_;
    std::vector<SubmitStatus> results_;
    bool started_{false};
    bool done_{false};
};

/// Runs a station (and optional script) until the loop is stopped or the
/// script ends. Returns 0, or 1 when a listener cannot be bound.
int run_station(transport::EventLoop& loop, const StationOptions& opts,
                std::optional<std::vector<ScriptStep>> script = std::nullopt,
                std::function<void(const StationEvent&)> on_event = {});

}  // namespace roboplat::station
