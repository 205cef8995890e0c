#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace roboplat::protocol {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint16_t kMaxPwm = 1000;
inline constexpr std::size_t kMaxChallenge = 64;

enum class MsgType : std::uint8_t {
    TestRequest = 0x01,
    TestResponse = 0x02,
    Busy = 0x03,
    CmdDigital = 0x10,
    CmdPwm = 0x11,
    AdcRequest = 0x20,
    AdcReport = 0x21,
    ConfigRequest = 0x22,
    ConfigResponse = 0x23,
    LatencyProbe = 0x30,
    LatencyEcho = 0x31,
    ThroughputData = 0x32,
    ThroughputAck = 0x33,
    Telemetry = 0x40,
};

struct TestRequest {
    Bytes challenge;
    bool operator==(const TestRequest&) const = default;
};

struct TestResponse {
    Bytes answer;
    bool operator==(const TestResponse&) const = default;
};

// Sent by a server that already serves a control client, right before it
// closes the new connection.
struct Busy {
    bool operator==(const Busy&) const = default;
};

struct CmdDigital {
    std::uint8_t line{0};
    std::uint8_t value{0};  // 0 or 1
    bool operator==(const CmdDigital&) const = default;
};

// Duty commands in permille of full scale.
struct CmdPwm {
    std::array<std::uint16_t, 4> strengths{};
    bool operator==(const CmdPwm&) const = default;
};

struct AdcRequest {
    bool operator==(const AdcRequest&) const = default;
};

struct AdcReading {
    std::uint8_t channel{0};
    std::uint16_t reading{0};
    bool operator==(const AdcReading&) const = default;
};

struct AdcReport {
    std::vector<AdcReading> samples;
    bool operator==(const AdcReport&) const = default;
};

struct ConfigRequest {
    bool operator==(const ConfigRequest&) const = default;
};

struct ConfigResponse {
    std::uint8_t channels{0};
    std::uint8_t resolution_bits{0};
    std::uint16_t sample_rate_hz{0};
    bool operator==(const ConfigResponse&) const = default;
};

struct LatencyProbe {
    std::uint64_t probe_id{0};
    bool operator==(const LatencyProbe&) const = default;
};

struct LatencyEcho {
    std::uint64_t probe_id{0};
    bool operator==(const LatencyEcho&) const = default;
};

// The high bit of `seq` asks the receiver to acknowledge everything received
// since its previous acknowledgement.
struct ThroughputData {
    static constexpr std::uint32_t kAckRequest = 0x8000'0000u;

    std::uint32_t seq{0};
    Bytes pattern;
    bool operator==(const ThroughputData&) const = default;
};

struct ThroughputAck {
    std::uint64_t bytes_ok{0};
    bool operator==(const ThroughputAck&) const = default;
};

enum class PlantKind : std::uint8_t { Car = 0, Quad = 1 };

// Snapshot of the device state relayed toward the operator.
struct Telemetry {
    std::uint64_t t_ns{0};
    PlantKind plant{PlantKind::Car};
    bool enable{false};
    bool forward{false};
    std::array<std::uint16_t, 4> pwm{};
    double car_pos_m{0.0};
    double car_vel_mps{0.0};
    double roll_rad{0.0};
    double pitch_rad{0.0};
    std::vector<AdcReading> adc;
    bool operator==(const Telemetry&) const = default;
};

using Message = std::variant<TestRequest, TestResponse, Busy, CmdDigital, CmdPwm, AdcRequest, AdcReport,
                             ConfigRequest, ConfigResponse, LatencyProbe, LatencyEcho, ThroughputData,
                             ThroughputAck, Telemetry>;

MsgType type_of(const Message& m);
const char* type_name(MsgType t);

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace roboplat::protocol
