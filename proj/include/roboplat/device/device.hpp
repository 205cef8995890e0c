#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "roboplat/commbench/bench.hpp"
#include "roboplat/protocol/messages.hpp"
#include "roboplat/transport/connection.hpp"
#include "roboplat/transport/framed_link.hpp"

namespace roboplat::device {

using protocol::PlantKind;

inline constexpr double kCarMaxSpeed = 1.0;  // m/s
inline constexpr double kQuadTau = 0.2;      // s
/// Equilibrium tilt (rad) per unit of normalized differential thrust.
inline constexpr double kQuadGain = 0.25;
/// Motor sign patterns for an X frame: roll (+,-,-,+), pitch (+,+,-,-).
inline constexpr std::array<int, 4> kRollSigns{+1, -1, -1, +1};
inline constexpr std::array<int, 4> kPitchSigns{+1, +1, -1, -1};

struct DeviceConfig {
    std::uint8_t channels{2};
    std::uint8_t resolution_bits{10};
    std::uint16_t sample_rate_hz{100};
    PlantKind plant{PlantKind::Car};

    /// Throws std::invalid_argument unless bits in [8,16], rate in [1,1000]
    /// and channels in [1,255].
    void validate() const;
    std::uint32_t max_reading() const { return (1u << resolution_bits) - 1; }
};

struct AdcChannel {
    std::uint16_t reading{0};
    bool fresh{false};
};

struct DeviceState {
    bool enable{false};   // digital line 0
    bool forward{false};  // digital line 1
    std::array<std::uint16_t, 4> pwm{};
    std::vector<AdcChannel> adc;
    double car_pos_m{0.0};
    double car_vel_mps{0.0};
    double roll_rad{0.0};
    double pitch_rad{0.0};
    std::int64_t t_ns{0};            // simulated time since start
    std::uint64_t samples_taken{0};  // ADC sampling instants so far (all channels sample together)
};

enum class DeviceErrorCode { UnknownLine, ProtocolViolation };

class DeviceError : public std::runtime_error {
public:
    DeviceError(DeviceErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    DeviceErrorCode code() const { return code_; }

private:
    DeviceErrorCode code_;
};

DeviceState initial_state(const DeviceConfig& cfg);

/// Applies CmdDigital or CmdPwm. Throws DeviceError(UnknownLine) for a line
/// above 1 and std::invalid_argument for other message types.
void apply_command(DeviceState& s, const protocol::Message& cmd);

/// ADC source: a per-channel sinusoid quantized to the configured resolution.
std::uint16_t adc_source(const DeviceConfig& cfg, std::size_t channel, double t_s);

/// Advances plant and ADC sampling to `t_ns`. Samples fire at k/sample_rate.
void advance_to(DeviceState& s, const DeviceConfig& cfg, std::int64_t t_ns);

/// Advances by `dt_s` seconds. Throws std::invalid_argument if dt_s <= 0.
void tick(DeviceState& s, const DeviceConfig& cfg, double dt_s);

/// Quad attitude the plant relaxes toward under the current PWM.
std::pair<double, double> quad_equilibrium(const std::array<std::uint16_t, 4>& pwm);

/// Report of every fresh channel; clears the flags.
protocol::AdcReport take_fresh(DeviceState& s);

protocol::ConfigResponse config_response(const DeviceConfig& cfg);

protocol::Telemetry make_telemetry(const DeviceState& s, const DeviceConfig& cfg, std::uint64_t t_ns,
                                   std::vector<protocol::AdcReading> adc);

struct DeviceCounters {
    std::uint64_t commands{0};
    std::uint64_t unknown_line{0};
    std::uint64_t protocol_violations{0};
    std::uint64_t adc_reports{0};
};

/// Serves one link at a time on an event loop. The plant runs on the loop's
/// clock and is brought up to date before each incoming message.
class DeviceNode {
public:
    DeviceNode(transport::EventLoop& loop, DeviceConfig cfg);
    ~DeviceNode();

    /// Takes over `conn`; any previous link is closed.
    void attach(transport::ConnectionPtr conn);

    /// State advanced to the loop's current time.
    const DeviceState& state();
    const DeviceConfig& config() const { return cfg_; }
    const DeviceCounters& counters() const { return counters_; }
    bool linked() const { return link_ != nullptr; }
    bool handshaken() const { return handshaken_; }

private:
    void on_message(const protocol::Message& m);
    void sync();
    void drop_link();

    transport::EventLoop& loop_;
    DeviceConfig cfg_;
    DeviceState state_;
    std::int64_t origin_ns_;
    std::unique_ptr<transport::FramedLink> link_;
    bool handshaken_{false};
    commbench::BenchResponder responder_;
    DeviceCounters counters_;
};

}  // namespace roboplat::device
