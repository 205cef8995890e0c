#include "roboplat/station/station.hpp"

#include <cmath>
#include <fstream>
#include <istream>

#include "roboplat/protocol/codec.hpp"
#include "roboplat/protocol/handshake.hpp"
#include "roboplat/station/ui_json.hpp"

namespace roboplat::station {

using namespace protocol;

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Listening: return "listening";
        case Phase::Handshaking: return "handshaking";
        case Phase::Ready: return "ready";
    }
    return "unknown";
}

const char* submit_status_name(SubmitStatus s) {
    switch (s) {
        case SubmitStatus::Accepted: return "Accepted";
        case SubmitStatus::NotConnected: return "NotConnected";
        case SubmitStatus::NotVerified: return "NotVerified";
        case SubmitStatus::BadValue: return "BadValue";
    }
    return "Unknown";
}

namespace {

constexpr std::size_t kEventCapacity = 1024;
constexpr std::size_t kMaxUiLine = 64 * 1024;

}  // namespace

struct Station::UiSession {
    std::uint64_t id{0};
    transport::ConnectionPtr conn;
    std::string buffer;
    std::optional<Nanos> last_telemetry;
    std::optional<transport::EventLoop::TimerId> flush_timer;
};

Station::Station(transport::EventLoop& loop, StationOptions opts)
    : loop_(loop), opts_(std::move(opts)), alive_(std::make_shared<bool>(true)) {
    if (!(opts_.telemetry_rate_hz > 0)) throw std::invalid_argument("telemetry rate must be positive");
    if (opts_.log_capacity == 0) throw std::invalid_argument("log capacity must be positive");
    rng_.seed(opts_.seed ? *opts_.seed : (std::uint64_t{std::random_device{}()} << 32) ^ std::random_device{}());
    bench_ = std::make_unique<commbench::BenchClient>(loop_, [this](const Message& m) {
        if (link_ && link_->is_open()) link_->send(m);
    });

    transport::ListenOptions lo;
    lo.max_clients = 1;
    lo.busy_notice = encode(Busy{});
    control_listener_ = transport::listen(
        loop_, opts_.control, [this](transport::ConnectionPtr c) { on_client(std::move(c)); }, lo);
    if (opts_.ui) {
        ui_listener_ = transport::listen(loop_, *opts_.ui, [this](transport::ConnectionPtr c) { on_ui(std::move(c)); });
    }
}

Station::~Station() {
    *alive_ = false;
    if (handshake_timer_) loop_.cancel(*handshake_timer_);
    for (auto& [id, s] : sessions_)
        if (s->flush_timer) loop_.cancel(*s->flush_timer);
}

std::uint64_t Station::clients_refused() const { return control_listener_ ? control_listener_->refused() : 0; }

transport::Endpoint Station::control_address() const { return control_listener_->address(); }

std::optional<transport::Endpoint> Station::ui_address() const {
    if (!ui_listener_) return std::nullopt;
    return ui_listener_->address();
}

void Station::log_event(std::string text) {
    if (events_.size() == kEventCapacity) events_.pop_front();
    events_.push_back({loop_.now(), std::move(text)});
    if (on_event_) on_event_(events_.back());
}

// ------------------------------------------------------------ control link

void Station::on_client(transport::ConnectionPtr conn) {
    if (stopped_) {
        conn->close();
        return;
    }
    ++counters_.clients_accepted;
    const auto label = conn->label();
    const auto gen = ++client_gen_;
    link_ = std::make_unique<transport::FramedLink>(
        std::move(conn), [this](const Message& m) { on_message(m); },
        [this, alive = alive_, gen] {
            // Deferred so a close raised inside a handler never frees the link under it.
            loop_.post([this, alive, gen] {
                if (*alive && gen == client_gen_) on_client_closed();
            });
        });
    phase_ = Phase::Handshaking;
    log_event("client connected: " + label);

    challenge_.resize(kChallengeSize);
    for (auto& b : challenge_) b = static_cast<std::uint8_t>(rng_());
    link_->send(TestRequest{challenge_});
    handshake_timer_ = loop_.call_after(opts_.handshake_timeout, [this, alive = alive_] {
        if (!*alive) return;
        handshake_timer_.reset();
        if (phase_ == Phase::Handshaking) {
            ++counters_.handshake_failures;
            drop_client("HandshakeFailed: timeout");
        }
    });
    broadcast_status();
}

void Station::on_message(const Message& m) {
    if (phase_ == Phase::Handshaking) {
        const auto* r = std::get_if<TestResponse>(&m);
        if (!r) return;
        if (handshake_timer_) loop_.cancel(*handshake_timer_);
        handshake_timer_.reset();
        if (!verify_handshake(challenge_, r->answer)) {
            ++counters_.handshake_failures;
            drop_client("HandshakeFailed: wrong answer");
            return;
        }
        ++counters_.handshakes_ok;
        phase_ = Phase::Ready;
        log_event("handshake verified");
        // First message after verification; the bridge treats it as the go-ahead.
        link_->send(ConfigRequest{});
        broadcast_status();
        if (on_verified_) on_verified_();
        return;
    }
    if (phase_ != Phase::Ready) return;
    if (bench_->handle(m)) return;
    if (const auto* t = std::get_if<Telemetry>(&m)) {
        telemetry_ = *t;
        ++counters_.telemetry_received;
        for (auto& [id, s] : sessions_) offer_telemetry(*s);
        return;
    }
    if (const auto* c = std::get_if<ConfigResponse>(&m)) {
        config_ = *c;
        log_event("device config: " + std::to_string(c->channels) + " channels, " +
                  std::to_string(c->resolution_bits) + " bits, " + std::to_string(c->sample_rate_hz) + " Hz");
        return;
    }
}

void Station::on_client_closed() {
    if (phase_ == Phase::Handshaking) ++counters_.handshake_failures;
    drop_client(phase_ == Phase::Handshaking ? "HandshakeFailed: client closed" : "client disconnected");
}

void Station::drop_client(const std::string& why) {
    if (!link_) return;
    if (handshake_timer_) loop_.cancel(*handshake_timer_);
    handshake_timer_.reset();
    if (bench_->busy()) bench_->abort();
    phase_ = Phase::Listening;
    auto link = std::move(link_);
    link->close();
    log_event(why);
    broadcast_status();
    if (on_disconnected_) on_disconnected_();
}

SubmitStatus Station::submit_command(const Message& cmd) {
    const auto* pwm = std::get_if<CmdPwm>(&cmd);
    if (!pwm && !std::holds_alternative<CmdDigital>(cmd)) throw std::invalid_argument("not a command");
    SubmitStatus status = SubmitStatus::Accepted;
    if (phase_ == Phase::Listening || !link_)
        status = SubmitStatus::NotConnected;
    else if (phase_ != Phase::Ready)
        status = SubmitStatus::NotVerified;
    else if (pwm) {
        for (auto v : pwm->strengths)
            if (v > kMaxPwm) status = SubmitStatus::BadValue;
    } else if (std::get<CmdDigital>(cmd).value > 1) {
        status = SubmitStatus::BadValue;
    }
    if (status != SubmitStatus::Accepted) {
        ++counters_.commands_rejected;
        return status;
    }
    link_->send(cmd);
    ++counters_.commands_sent;
    if (log_.size() == opts_.log_capacity) log_.pop_front();
    log_.push_back({loop_.now(), cmd});
    return status;
}

bool Station::run_latency_test(const commbench::LatencyOptions& opts,
                               std::function<void(const commbench::LatencyResult&)> done) {
    if (phase_ != Phase::Ready || bench_->busy()) return false;
    bench_->start_latency(opts, std::move(done));
    return true;
}

void Station::stop() {
    if (stopped_) return;
    stopped_ = true;
    drop_client("station stopped");
    for (auto& [id, s] : sessions_) {
        if (s->flush_timer) loop_.cancel(*s->flush_timer);
        s->conn->close();
    }
    sessions_.clear();
    if (control_listener_) control_listener_->close();
    if (ui_listener_) ui_listener_->close();
}

// ------------------------------------------------------------- UI gateway

void Station::on_ui(transport::ConnectionPtr conn) {
    if (stopped_) {
        conn->close();
        return;
    }
    const auto id = next_session_++;
    auto s = std::make_unique<UiSession>();
    s->id = id;
    s->conn = conn;
    conn->set_data_handler([this, alive = alive_, id](std::span<const std::uint8_t> b) {
        if (*alive) on_ui_bytes(id, b);
    });
    conn->add_close_handler([this, alive = alive_, id] {
        loop_.post([this, alive, id] {
            if (!*alive) return;
            auto it = sessions_.find(id);
            if (it == sessions_.end()) return;
            if (it->second->flush_timer) loop_.cancel(*it->second->flush_timer);
            sessions_.erase(it);
        });
    });
    auto& ref = *s;
    sessions_.emplace(id, std::move(s));
    ui_send(ref, status_json(connected(), verified()));
}

void Station::ui_send(UiSession& s, const std::string& line) {
    if (!s.conn->is_open()) return;
    std::string out = line;
    out.push_back('\n');
    s.conn->send(std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
}

void Station::on_ui_bytes(std::uint64_t id, std::span<const std::uint8_t> bytes) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return;
    auto& buf = it->second->buffer;
    buf.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    std::size_t start = 0;
    for (std::size_t nl; (nl = buf.find('\n', start)) != std::string::npos; start = nl + 1) {
        std::string line = buf.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) on_ui_line(id, line);
        // The handler may have closed this session.
        if (sessions_.find(id) == sessions_.end()) return;
    }
    buf.erase(0, start);
    if (buf.size() > kMaxUiLine) {
        buf.clear();
        ++counters_.ui_errors;
        ui_send(*sessions_.at(id), error_json("line too long"));
    }
}

void Station::on_ui_line(std::uint64_t id, const std::string& line) {
    auto& s = *sessions_.at(id);
    UiRequest req;
    try {
        req = parse_ui_request(line);
    } catch (const UiError& e) {
        ++counters_.ui_errors;
        ui_send(s, error_json(e.what()));
        return;
    }
    if (const auto* c = std::get_if<UiCommand>(&req)) {
        const auto status = submit_command(c->command);
        if (status == SubmitStatus::Accepted)
            ui_send(s, ack_json(std::holds_alternative<CmdDigital>(c->command) ? "digital" : "pwm"));
        else
            ui_send(s, error_json(submit_status_name(status)));
        return;
    }
    if (const auto* t = std::get_if<UiLatencyTest>(&req)) {
        commbench::LatencyOptions lo;
        lo.rounds = 1;
        lo.probes_per_round = t->probes;
        lo.timeout = opts_.probe_timeout;
        const bool started = run_latency_test(lo, [this, alive = alive_, id](const commbench::LatencyResult& r) {
            if (!*alive) return;
            auto it = sessions_.find(id);
            if (it != sessions_.end()) ui_send(*it->second, bench_result_json(r));
        });
        if (!started) ui_send(s, error_json(verified() ? "Busy" : "NotVerified"));
        return;
    }
    ui_send(s, status_json(connected(), verified()));
}

void Station::broadcast_status() {
    const auto line = status_json(connected(), verified());
    for (auto& [id, s] : sessions_) ui_send(*s, line);
}

void Station::offer_telemetry(UiSession& s) {
    const auto interval = Nanos(std::llround(1e9 / opts_.telemetry_rate_hz));
    const auto now = loop_.now();
    if (!s.last_telemetry || now - *s.last_telemetry >= interval) {
        if (s.flush_timer) loop_.cancel(*s.flush_timer);
        s.flush_timer.reset();
        s.last_telemetry = now;
        ui_send(s, telemetry_json(*telemetry_));
        ++counters_.ui_telemetry_sent;
        return;
    }
    // Too soon: the newest snapshot goes out when the interval has elapsed.
    if (!s.flush_timer) {
        s.flush_timer = loop_.call_at(*s.last_telemetry + interval, [this, alive = alive_, id = s.id] {
            if (*alive) flush_telemetry(id);
        });
    }
}

void Station::flush_telemetry(std::uint64_t id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return;
    auto& s = *it->second;
    s.flush_timer.reset();
    if (!telemetry_) return;
    s.last_telemetry = loop_.now();
    ui_send(s, telemetry_json(*telemetry_));
    ++counters_.ui_telemetry_sent;
}

// ----------------------------------------------------------------- scripts

std::vector<ScriptStep> parse_script(std::istream& in) {
    std::vector<ScriptStep> steps;
    std::string line;
    std::size_t n = 0;
    Nanos prev{0};
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto where = "script line " + std::to_string(n) + ": ";
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw ScriptError(where + "malformed JSON");
        }
        if (!j.is_object() || !j.contains("t_ms") || !j.at("t_ms").is_number())
            throw ScriptError(where + "missing numeric 't_ms'");
        const double t_ms = j.at("t_ms").get<double>();
        if (!(t_ms >= 0) || !std::isfinite(t_ms)) throw ScriptError(where + "'t_ms' must be >= 0");
        ScriptStep step;
        step.at = Nanos(std::llround(t_ms * 1e6));
        if (step.at < prev) throw ScriptError(where + "times must not decrease");
        prev = step.at;
        if (j.contains("type") && j.at("type") == "end") {
            steps.push_back(step);
            continue;
        }
        try {
            auto req = parse_ui_request(line);
            const auto* c = std::get_if<UiCommand>(&req);
            if (!c) throw ScriptError(where + "only digital, pwm and end steps are allowed");
            step.command = c->command;
        } catch (const UiError& e) {
            throw ScriptError(where + e.what());
        }
        steps.push_back(std::move(step));
    }
    return steps;
}

std::vector<ScriptStep> load_script(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ScriptError("cannot open script " + file.string());
    return parse_script(in);
}

ScriptRunner::ScriptRunner(transport::EventLoop& loop, Station& station, std::vector<ScriptStep> steps,
                           std::function<void()> on_end)
    : loop_(loop), station_(station), steps_(std::move(steps)), on_end_(std::move(on_end)),
      alive_(std::make_shared<bool>(true)) {
    station_.set_on_verified([this, alive = alive_] {
        if (*alive) begin();
    });
    if (station_.verified()) begin();
}

ScriptRunner::~ScriptRunner() {
    *alive_ = false;
    for (auto id : timers_) loop_.cancel(id);
}

void ScriptRunner::begin() {
    if (started_) return;
    started_ = true;
    if (steps_.empty()) {
        done_ = true;
        return;
    }
    const auto t0 = loop_.now();
    for (std::size_t i = 0; i < steps_.size(); ++i) {
        timers_.push_back(loop_.call_at(t0 + steps_[i].at, [this, alive = alive_, i] {
            if (*alive) step(i);
        }));
    }
}

void ScriptRunner::step(std::size_t i) {
    if (done_) return;
    const auto& s = steps_[i];
    if (s.command) {
        results_.push_back(station_.submit_command(*s.command));
        if (i + 1 == steps_.size()) done_ = true;
        return;
    }
    done_ = true;
    for (auto id : timers_) loop_.cancel(id);
    timers_.clear();
    if (on_end_) on_end_();
}

int run_station(transport::EventLoop& loop, const StationOptions& opts, std::optional<std::vector<ScriptStep>> script,
                std::function<void(const StationEvent&)> on_event) {
    std::unique_ptr<Station> st;
    try {
        st = std::make_unique<Station>(loop, opts);
    } catch (const transport::TransportError& e) {
        if (on_event) on_event({loop.now(), std::string("cannot listen: ") + e.what()});
        return 1;
    }
    if (on_event) st->set_on_event(on_event);
    std::unique_ptr<ScriptRunner> runner;
    if (script) {
        runner = std::make_unique<ScriptRunner>(loop, *st, std::move(*script), [&] {
            st->stop();
            loop.stop();
        });
    }
    loop.run();
    st->stop();
    // Let closes and queued writes drain.
    loop.clear_stop();
    loop.run_for(std::chrono::milliseconds(50));
    return 0;
}

}  // namespace roboplat::station
