#include "roboplat/bridge/bridge.hpp"

#include <cmath>

#include "roboplat/protocol/handshake.hpp"

namespace roboplat::bridge {

using namespace protocol;

const char* exit_name(BridgeExit e) {
    switch (e) {
        case BridgeExit::Running: return "Running";
        case BridgeExit::LinkLost: return "LinkLost";
        case BridgeExit::Stopped: return "Stopped";
        case BridgeExit::HandshakeFailedUpstream: return "HandshakeFailed(upstream)";
        case BridgeExit::HandshakeFailedDownstream: return "HandshakeFailed(downstream)";
        case BridgeExit::DeviceLost: return "DeviceLost";
        case BridgeExit::ConnectFailed: return "ConnectFailed";
    }
    return "Unknown";
}

int exit_code(BridgeExit e) {
    switch (e) {
        case BridgeExit::Running:
        case BridgeExit::LinkLost:
        case BridgeExit::Stopped: return 0;
        case BridgeExit::HandshakeFailedUpstream: return 2;
        case BridgeExit::HandshakeFailedDownstream: return 3;
        case BridgeExit::DeviceLost: return 4;
        case BridgeExit::ConnectFailed: return 5;
    }
    return 1;
}

namespace {

constexpr std::size_t kChallengeSize = 16;
constexpr std::size_t kPendingBound = 1024;

}  // namespace

BridgeNode::BridgeNode(transport::EventLoop& loop, BridgeOptions opts)
    : loop_(loop),
      opts_(std::move(opts)),
      alive_(std::make_shared<bool>(true)),
      plant_(opts_.plant),
      mixer_(opts_.mixer),
      rng_(opts_.seed),
      responder_([this](const Message& m) { send_up(m); }) {
    if (opts_.record_dir) writer_ = dataset::SessionWriter::open(*opts_.record_dir, {dataset::StreamKind::Adc});

    cmd_sub_ = bus_.subscribe("cmd");
    cmd_sub_->set_notify([this] {
        while (auto m = cmd_sub_->pop()) to_device(std::get<Message>(m->payload));
    });
    adc_sub_ = bus_.subscribe("adc");
    adc_sub_->set_notify([this] {
        while (auto m = adc_sub_->pop())
            if (writer_) writer_->append(dataset::StreamKind::Adc, std::get<dataset::SensorRecord>(m->payload));
    });
    telemetry_sub_ = bus_.subscribe("telemetry");
    telemetry_sub_->set_notify([this] {
        while (auto m = telemetry_sub_->pop()) {
            if (up_answered_) {
                send_up(std::get<Message>(m->payload));
                ++counters_.telemetry_forwarded;
            }
        }
    });
    config_sub_ = bus_.subscribe("config");
    config_sub_->set_notify([this] {
        while (auto m = config_sub_->pop()) store_config(std::get<ConfigResponse>(std::get<Message>(m->payload)));
    });
}

BridgeNode::~BridgeNode() {
    *alive_ = false;
    if (handshake_timer_) loop_.cancel(*handshake_timer_);
    if (poll_timer_) loop_.cancel(*poll_timer_);
}

void BridgeNode::start(transport::ConnectionPtr downstream, transport::ConnectionPtr upstream) {
    const auto deferred = [this](void (BridgeNode::*fn)()) {
        return [this, alive = alive_, fn] {
            loop_.post([this, alive, fn] {
                if (*alive) (this->*fn)();
            });
        };
    };
    down_ = std::make_unique<transport::FramedLink>(
        std::move(downstream), [this](const Message& m) { on_down(m); }, deferred(&BridgeNode::on_down_closed));
    up_ = std::make_unique<transport::FramedLink>(
        std::move(upstream), [this](const Message& m) { on_up(m); }, deferred(&BridgeNode::on_up_closed));

    challenge_.resize(kChallengeSize);
    for (auto& b : challenge_) b = static_cast<std::uint8_t>(rng_());
    send_down(TestRequest{challenge_});
    handshake_timer_ = loop_.call_after(opts_.handshake_timeout, [this, alive = alive_] {
        if (!*alive) return;
        handshake_timer_.reset();
        if (!down_verified_) finish(BridgeExit::HandshakeFailedDownstream);
    });
}

void BridgeNode::send_down(const Message& m) {
    if (down_ && down_->is_open()) down_->send(m);
}

void BridgeNode::send_up(const Message& m) {
    if (up_ && up_->is_open()) up_->send(m);
}

// ---------------------------------------------------------------- upstream

void BridgeNode::on_up(const Message& m) {
    if (finished()) return;
    if (const auto* req = std::get_if<TestRequest>(&m)) {
        auto answer = handshake_answer(req->challenge);
        if (opts_.corrupt_upstream_answer) answer.front() ^= 0x5A;
        send_up(TestResponse{std::move(answer)});
        up_answered_ = true;
        return;
    }
    if (std::holds_alternative<TestResponse>(m)) return;
    // The station only talks after it has verified our answer.
    up_verified_ = true;
    if (std::holds_alternative<CmdDigital>(m) || std::holds_alternative<CmdPwm>(m)) {
        bus_.publish("cmd", m, loop_.now());
        return;
    }
    if (std::holds_alternative<ConfigRequest>(m)) {
        if (config_) send_up(*config_);
        else up_wants_config_ = true;
        return;
    }
    responder_.handle(m);
}

void BridgeNode::on_up_closed() {
    if (finished()) return;
    if (up_answered_ && !up_verified_) {
        finish(BridgeExit::HandshakeFailedUpstream);
        return;
    }
    finish(BridgeExit::LinkLost);
}

// -------------------------------------------------------------- downstream

void BridgeNode::to_device(const Message& m) {
    if (!down_verified_) {
        if (pending_.size() == kPendingBound) {
            pending_.pop_front();
            ++counters_.commands_dropped;
        }
        pending_.push_back(m);
        return;
    }
    if (const auto* p = std::get_if<CmdPwm>(&m); p && plant_ == PlantKind::Quad) {
        double sum = 0;
        for (auto v : p->strengths) sum += v;
        mixer_.base_throttle = sum / 4.0;
        const auto out = mixer_.base_throttle > 0 ? mix_pwm(mixer_, estimate_, {}) : std::array<std::uint16_t, 4>{};
        mixer_.last_pwm = out;
        send_down(CmdPwm{out});
        ++counters_.commands_forwarded;
        return;
    }
    send_down(m);
    ++counters_.commands_forwarded;
}

void BridgeNode::on_down(const Message& m) {
    if (finished()) return;
    if (const auto* resp = std::get_if<TestResponse>(&m)) {
        if (down_verified_) return;
        if (!verify_handshake(challenge_, resp->answer)) {
            finish(BridgeExit::HandshakeFailedDownstream);
            return;
        }
        down_verified_ = true;
        if (handshake_timer_) loop_.cancel(*handshake_timer_);
        handshake_timer_.reset();
        send_down(ConfigRequest{});
        poll_timer_ = loop_.call_after(opts_.poll_period, [this, alive = alive_] {
            if (*alive) poll();
        });
        auto queued = std::move(pending_);
        pending_.clear();
        for (const auto& q : queued) to_device(q);
        return;
    }
    if (const auto* req = std::get_if<TestRequest>(&m)) {
        send_down(TestResponse{handshake_answer(req->challenge)});
        return;
    }
    if (!down_verified_) return;

    if (const auto* report = std::get_if<AdcReport>(&m)) {
        const auto t = loop_.now();
        for (const auto& s : report->samples) {
            dataset::AdcSample rec{t.count(), s.reading, s.channel};
            bus_.publish("adc", dataset::SensorRecord(rec), t);
            ++counters_.adc_samples;
        }
        return;
    }
    if (std::holds_alternative<ConfigResponse>(m)) {
        bus_.publish("config", m, loop_.now());
        return;
    }
    if (const auto* tel = std::get_if<Telemetry>(&m)) {
        plant_ = opts_.plant.value_or(tel->plant);
        if (plant_ == PlantKind::Quad) quad_step(*tel);
        bus_.publish("telemetry", m, loop_.now());
        return;
    }
}

void BridgeNode::on_down_closed() {
    if (finished()) return;
    finish(down_verified_ ? BridgeExit::DeviceLost : BridgeExit::HandshakeFailedDownstream);
}

void BridgeNode::poll() {
    poll_timer_.reset();
    if (finished() || !down_ || !down_->is_open()) return;
    send_down(AdcRequest{});
    ++counters_.polls;
    poll_timer_ = loop_.call_after(opts_.poll_period, [this, alive = alive_] {
        if (*alive) poll();
    });
}

void BridgeNode::store_config(const ConfigResponse& c) {
    config_ = c;
    if (writer_) {
        writer_->write_calibration("device", {{"adc_channels", std::to_string(c.channels)},
                                              {"resolution_bits", std::to_string(c.resolution_bits)},
                                              {"sample_rate_hz", std::to_string(c.sample_rate_hz)}});
    }
    if (up_wants_config_) {
        up_wants_config_ = false;
        send_up(c);
    }
}

void BridgeNode::quad_step(const Telemetry& t) {
    const Attitude truth{t.roll_rad, t.pitch_rad};
    if (!last_truth_ || t.t_ns <= last_truth_->first) {
        if (!last_truth_) estimate_ = truth;
        last_truth_ = {t.t_ns, truth};
        return;
    }
    const double dt = static_cast<double>(t.t_ns - last_truth_->first) * 1e-9;
    std::normal_distribution<double> gyro_noise(0.0, opts_.gyro_noise_std > 0 ? opts_.gyro_noise_std : 1.0);
    std::normal_distribution<double> accel_noise(0.0, opts_.accel_noise_std > 0 ? opts_.accel_noise_std : 1.0);
    const auto gn = [&] { return opts_.gyro_noise_std > 0 ? gyro_noise(rng_) : 0.0; };
    const auto an = [&] { return opts_.accel_noise_std > 0 ? accel_noise(rng_) : 0.0; };

    const Vec3 gyro{(truth.roll - last_truth_->second.roll) / dt + gn(),
                    (truth.pitch - last_truth_->second.pitch) / dt + gn(), gn()};
    const Vec3 accel{-kGravity * std::sin(truth.pitch) + an(),
                     kGravity * std::sin(truth.roll) * std::cos(truth.pitch) + an(),
                     kGravity * std::cos(truth.roll) * std::cos(truth.pitch) + an()};
    last_truth_ = {t.t_ns, truth};
    estimate_ = complementary_filter(estimate_, gyro, accel, dt, opts_.alpha);

    if (mixer_.base_throttle > 0 && down_verified_) {
        const auto out = mix_pwm(mixer_, estimate_, {gyro[0], gyro[1]});
        mixer_.last_pwm = out;
        send_down(CmdPwm{out});
        ++counters_.mixer_outputs;
    }
}

// ---------------------------------------------------------------- shutdown

void BridgeNode::failsafe() {
    mixer_.base_throttle = 0;
    if (!down_verified_) return;
    if (plant_ != PlantKind::Car) send_down(CmdPwm{});
    if (plant_ != PlantKind::Quad) send_down(CmdDigital{0, 0});
}

void BridgeNode::stop() {
    if (!finished()) finish(BridgeExit::Stopped);
}

void BridgeNode::finish(BridgeExit e) {
    if (finished()) return;
    if (e == BridgeExit::LinkLost || e == BridgeExit::Stopped) failsafe();
    exit_ = e;
    if (handshake_timer_) loop_.cancel(*handshake_timer_);
    if (poll_timer_) loop_.cancel(*poll_timer_);
    handshake_timer_.reset();
    poll_timer_.reset();
    if (writer_) writer_->flush();
    if (down_) down_->close();
    if (up_) up_->close();
    if (on_finished_) {
        loop_.post([fn = on_finished_, e] { fn(e); });
    }
}

// ----------------------------------------------------------------- process

std::unique_ptr<BridgeProcess> BridgeProcess::launch(transport::EventLoop& loop, const BridgeOptions& opts) {
    auto p = std::unique_ptr<BridgeProcess>(new BridgeProcess());
    p->node_ = std::make_unique<BridgeNode>(loop, opts);
    transport::ConnectionPtr down;
    if (opts.device) {
        down = transport::connect(loop, *opts.device);
    } else {
        auto cfg = opts.sim_config;
        if (opts.plant) cfg.plant = *opts.plant;
        p->device_ = std::make_unique<device::DeviceNode>(loop, cfg);
        auto [host, dev] = transport::make_pipe(loop, "pipe:usb-host", "pipe:usb-device");
        p->device_->attach(dev);
        down = host;
    }
    auto up = transport::connect(loop, opts.server);
    if (opts.upstream_shaping) up = transport::shape(up, *opts.upstream_shaping);
    p->node_->start(down, up);
    return p;
}

int run_bridge(transport::EventLoop& loop, const BridgeOptions& opts) {
    std::unique_ptr<BridgeProcess> proc;
    try {
        proc = BridgeProcess::launch(loop, opts);
    } catch (const transport::TransportError&) {
        return exit_code(BridgeExit::ConnectFailed);
    }
    loop.run_until_condition([&] { return proc->node().finished(); }, Nanos::max() / 2);
    if (!proc->node().finished()) proc->node().stop();
    // Let the failsafe and closes drain.
    loop.clear_stop();
    loop.run_for(std::chrono::milliseconds(50));
    return exit_code(proc->node().exit());
}

}  // namespace roboplat::bridge
