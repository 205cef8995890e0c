#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>

#include "roboplat/bridge/attitude.hpp"
#include "roboplat/bridge/bus.hpp"
#include "roboplat/commbench/bench.hpp"
#include "roboplat/dataset/session.hpp"
#include "roboplat/device/device.hpp"
#include "roboplat/transport/framed_link.hpp"
#include "roboplat/transport/net.hpp"
#include "roboplat/transport/shaping.hpp"

namespace roboplat::bridge {

using transport::Nanos;

enum class BridgeExit {
    Running,
    LinkLost,                   // upstream closed after verification; failsafe sent
    Stopped,                    // local stop request; failsafe sent
    HandshakeFailedUpstream,
    HandshakeFailedDownstream,
    DeviceLost,
    ConnectFailed,
};

const char* exit_name(BridgeExit e);
/// Process exit status: 0 for LinkLost/Stopped, distinct non-zero otherwise.
int exit_code(BridgeExit e);

struct BridgeOptions {
    transport::Endpoint server;
    /// Device endpoint; nullopt runs an in-process simulated device.
    std::optional<transport::Endpoint> device;
    device::DeviceConfig sim_config;
    std::optional<std::filesystem::path> record_dir;
    Nanos poll_period{std::chrono::milliseconds(10)};
    /// Overrides the plant kind reported by device telemetry.
    std::optional<protocol::PlantKind> plant;
    MixerState mixer;
    double alpha{kDefaultAlpha};
    double gyro_noise_std{0.0};   // rad/s
    double accel_noise_std{0.0};  // m/s^2
    std::uint64_t seed{1};
    Nanos handshake_timeout{std::chrono::seconds(5)};
    /// Applied to the upstream link, e.g. to stand in for a wireless hop.
    std::optional<transport::ShapingParams> upstream_shaping;
    /// Fault injection: answer the upstream challenge incorrectly.
    bool corrupt_upstream_answer{false};
};

struct BridgeCounters {
    std::uint64_t commands_forwarded{0};
    std::uint64_t mixer_outputs{0};
    std::uint64_t polls{0};
    std::uint64_t adc_samples{0};
    std::uint64_t telemetry_forwarded{0};
    std::uint64_t commands_dropped{0};  // queue overflow before the device was verified
};

inline constexpr double kGravity = 9.81;

/// The relay between the station (upstream) and the device (downstream).
/// Internally the upstream link, downstream link and poll timer exchange
/// data only through the bus.
class BridgeNode {
public:
    BridgeNode(transport::EventLoop& loop, BridgeOptions opts);
    ~BridgeNode();
    BridgeNode(const BridgeNode&) = delete;
    BridgeNode& operator=(const BridgeNode&) = delete;

    void start(transport::ConnectionPtr downstream, transport::ConnectionPtr upstream);
    /// Sends the failsafe and shuts both links down.
    void stop();

    bool finished() const { return exit_ != BridgeExit::Running; }
    BridgeExit exit() const { return exit_; }
    void set_on_finished(std::function<void(BridgeExit)> fn) { on_finished_ = std::move(fn); }

    Bus& bus() { return bus_; }
    const BridgeCounters& counters() const { return counters_; }
    const std::optional<protocol::ConfigResponse>& device_config() const { return config_; }
    std::optional<protocol::PlantKind> plant() const { return plant_; }
    Attitude attitude_estimate() const { return estimate_; }
    bool upstream_verified() const { return up_verified_; }
    bool downstream_verified() const { return down_verified_; }

private:
    void on_up(const protocol::Message& m);
    void on_down(const protocol::Message& m);
    void on_up_closed();
    void on_down_closed();
    void to_device(const protocol::Message& m);
    void send_down(const protocol::Message& m);
    void send_up(const protocol::Message& m);
    void poll();
    void quad_step(const protocol::Telemetry& t);
    void store_config(const protocol::ConfigResponse& c);
    void failsafe();
    void finish(BridgeExit e);

    transport::EventLoop& loop_;
    BridgeOptions opts_;
    Bus bus_;
    std::unique_ptr<transport::FramedLink> up_;
    std::unique_ptr<transport::FramedLink> down_;
    std::shared_ptr<bool> alive_;

    bool up_answered_{false};
    bool up_verified_{false};
    bool up_wants_config_{false};
    protocol::Bytes challenge_;
    bool down_verified_{false};
    std::optional<transport::EventLoop::TimerId> handshake_timer_;
    std::optional<transport::EventLoop::TimerId> poll_timer_;
    std::deque<protocol::Message> pending_;

    std::optional<protocol::ConfigResponse> config_;
    std::optional<protocol::PlantKind> plant_;
    std::optional<dataset::SessionWriter> writer_;

    MixerState mixer_;
    Attitude estimate_;
    std::optional<std::pair<std::uint64_t, Attitude>> last_truth_;
    std::mt19937_64 rng_;

    commbench::BenchResponder responder_;
    std::shared_ptr<Subscription> cmd_sub_, adc_sub_, telemetry_sub_, config_sub_;

    BridgeCounters counters_;
    BridgeExit exit_{BridgeExit::Running};
    std::function<void(BridgeExit)> on_finished_;
};

/// A bridge with its connections and, if requested, its simulated device.
class BridgeProcess {
public:
    /// Connects both links and starts the node. Throws TransportError if an
    /// endpoint is unreachable and dataset::DatasetError if the recording
    /// directory is unusable.
    static std::unique_ptr<BridgeProcess> launch(transport::EventLoop& loop, const BridgeOptions& opts);

    BridgeNode& node() { return *node_; }
    device::DeviceNode* sim_device() { return device_.get(); }

private:
    std::unique_ptr<device::DeviceNode> device_;
    std::unique_ptr<BridgeNode> node_;
};

/// Launches a bridge and runs the loop until it finishes. Returns the
/// process exit status.
int run_bridge(transport::EventLoop& loop, const BridgeOptions& opts);

}  // namespace roboplat::bridge
