#include "roboplat/device/device.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "roboplat/protocol/handshake.hpp"

namespace roboplat::device {

using namespace protocol;

void DeviceConfig::validate() const {
    if (resolution_bits < 8 || resolution_bits > 16) throw std::invalid_argument("resolution_bits must be in [8,16]");
    if (sample_rate_hz < 1 || sample_rate_hz > 1000) throw std::invalid_argument("sample_rate_hz must be in [1,1000]");
    if (channels < 1) throw std::invalid_argument("at least one ADC channel required");
}

DeviceState initial_state(const DeviceConfig& cfg) {
    DeviceState s;
    s.adc.resize(cfg.channels);
    return s;
}

void apply_command(DeviceState& s, const Message& cmd) {
    if (const auto* d = std::get_if<CmdDigital>(&cmd)) {
        if (d->line >= 2)
            throw DeviceError(DeviceErrorCode::UnknownLine, "UnknownLine: " + std::to_string(d->line));
        (d->line == 0 ? s.enable : s.forward) = d->value != 0;
        return;
    }
    if (const auto* p = std::get_if<CmdPwm>(&cmd)) {
        s.pwm = p->strengths;
        return;
    }
    throw std::invalid_argument(std::string("not a command: ") + type_name(type_of(cmd)));
}

std::uint16_t adc_source(const DeviceConfig& cfg, std::size_t channel, double t_s) {
    const double full = cfg.max_reading();
    const double f = 0.5 * static_cast<double>(channel + 1);
    const double v = 0.5 * full + 0.4 * full * std::sin(2 * std::numbers::pi * f * t_s);
    return static_cast<std::uint16_t>(std::clamp(std::llround(v), 0LL, static_cast<long long>(full)));
}

std::pair<double, double> quad_equilibrium(const std::array<std::uint16_t, 4>& pwm) {
    double roll = 0, pitch = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        roll += kRollSigns[i] * pwm[i] / 1000.0;
        pitch += kPitchSigns[i] * pwm[i] / 1000.0;
    }
    return {-kQuadGain * roll, -kQuadGain * pitch};
}

namespace {

std::int64_t sample_time_ns(std::uint64_t k, std::uint16_t rate) {
    return static_cast<std::int64_t>(k * 1'000'000'000ULL / rate);
}

void integrate_plant(DeviceState& s, double dt) {
    s.car_vel_mps = s.enable ? (s.forward ? kCarMaxSpeed : -kCarMaxSpeed) : 0.0;
    s.car_pos_m += s.car_vel_mps * dt;
    const auto [roll_eq, pitch_eq] = quad_equilibrium(s.pwm);
    const double decay = std::exp(-dt / kQuadTau);
    s.roll_rad = roll_eq + (s.roll_rad - roll_eq) * decay;
    s.pitch_rad = pitch_eq + (s.pitch_rad - pitch_eq) * decay;
}

}  // namespace

void advance_to(DeviceState& s, const DeviceConfig& cfg, std::int64_t t_ns) {
    if (t_ns <= s.t_ns) return;
    integrate_plant(s, static_cast<double>(t_ns - s.t_ns) * 1e-9);
    // Only the most recent instant matters for the buffer; earlier ones are
    // overwritten but still counted.
    std::uint64_t k = s.samples_taken;
    while (sample_time_ns(k + 1, cfg.sample_rate_hz) <= t_ns) ++k;
    if (k != s.samples_taken) {
        const double ts = static_cast<double>(sample_time_ns(k, cfg.sample_rate_hz)) * 1e-9;
        for (std::size_t c = 0; c < s.adc.size(); ++c) s.adc[c] = AdcChannel{adc_source(cfg, c, ts), true};
        s.samples_taken = k;
    }
    s.t_ns = t_ns;
}

void tick(DeviceState& s, const DeviceConfig& cfg, double dt_s) {
    if (!(dt_s > 0)) throw std::invalid_argument("dt must be positive");
    advance_to(s, cfg, s.t_ns + std::llround(dt_s * 1e9));
}

AdcReport take_fresh(DeviceState& s) {
    AdcReport r;
    for (std::size_t c = 0; c < s.adc.size(); ++c) {
        if (!s.adc[c].fresh) continue;
        r.samples.push_back(AdcReading{static_cast<std::uint8_t>(c), s.adc[c].reading});
        s.adc[c].fresh = false;
    }
    return r;
}

ConfigResponse config_response(const DeviceConfig& cfg) {
    return ConfigResponse{cfg.channels, cfg.resolution_bits, cfg.sample_rate_hz};
}

Telemetry make_telemetry(const DeviceState& s, const DeviceConfig& cfg, std::uint64_t t_ns,
                         std::vector<AdcReading> adc) {
    Telemetry t;
    t.t_ns = t_ns;
    t.plant = cfg.plant;
    t.enable = s.enable;
    t.forward = s.forward;
    t.pwm = s.pwm;
    t.car_pos_m = s.car_pos_m;
    t.car_vel_mps = s.car_vel_mps;
    t.roll_rad = s.roll_rad;
    t.pitch_rad = s.pitch_rad;
    t.adc = std::move(adc);
    return t;
}

// -------------------------------------------------------------- DeviceNode

DeviceNode::DeviceNode(transport::EventLoop& loop, DeviceConfig cfg)
    : loop_(loop),
      cfg_(cfg),
      state_(initial_state(cfg)),
      origin_ns_(loop.now().count()),
      responder_([this](const Message& m) {
          if (link_) link_->send(m);
      }) {
    cfg_.validate();
}

DeviceNode::~DeviceNode() = default;

void DeviceNode::sync() { advance_to(state_, cfg_, loop_.now().count() - origin_ns_); }

const DeviceState& DeviceNode::state() {
    sync();
    return state_;
}

void DeviceNode::attach(transport::ConnectionPtr conn) {
    if (link_) link_->close();
    handshaken_ = false;
    link_ = std::make_unique<transport::FramedLink>(
        std::move(conn), [this](const Message& m) { on_message(m); },
        [this] { loop_.post([this] { drop_link(); }); });
}

void DeviceNode::drop_link() {
    if (link_ && !link_->is_open()) {
        link_.reset();
        handshaken_ = false;
    }
}

void DeviceNode::on_message(const Message& m) {
    sync();
    if (const auto* req = std::get_if<TestRequest>(&m)) {
        link_->send(TestResponse{handshake_answer(req->challenge)});
        handshaken_ = true;
        return;
    }
    if (std::holds_alternative<TestResponse>(m)) return;
    if (!handshaken_) {
        ++counters_.protocol_violations;
        link_->close();
        return;
    }
    if (std::holds_alternative<CmdDigital>(m) || std::holds_alternative<CmdPwm>(m)) {
        ++counters_.commands;
        try {
            apply_command(state_, m);
        } catch (const DeviceError&) {
            ++counters_.unknown_line;
        }
        return;
    }
    if (std::holds_alternative<AdcRequest>(m)) {
        auto report = take_fresh(state_);
        ++counters_.adc_reports;
        auto samples = report.samples;
        link_->send(report);
        link_->send(make_telemetry(state_, cfg_, static_cast<std::uint64_t>(loop_.now().count()), std::move(samples)));
        return;
    }
    if (std::holds_alternative<ConfigRequest>(m)) {
        link_->send(config_response(cfg_));
        return;
    }
    responder_.handle(m);
}

}  // namespace roboplat::device
