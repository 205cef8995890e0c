#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "roboplat/protocol/messages.hpp"
#include "roboplat/transport/event_loop.hpp"
#include "roboplat/transport/shaping.hpp"

namespace roboplat::commbench {

using protocol::Bytes;
using protocol::Message;
using transport::Nanos;

inline constexpr std::array<std::size_t, 4> kTableSizes{64, 256, 512, 1024};
/// Frame size of one packet in chunked mode.
inline constexpr std::size_t kChunkSize = 64;
/// Smallest packet: frame overhead plus the 4-byte sequence number.
inline constexpr std::size_t kMinPacketSize = 14;

struct LatencyOptions {
    std::size_t rounds{10};
    std::size_t probes_per_round{100};
    Nanos timeout{std::chrono::seconds(2)};
};

struct LatencyResult {
    std::size_t sent{0};
    std::size_t received{0};
    std::size_t timeouts{0};
    std::size_t mismatched{0};
    double mean_ms{0.0};
    double std_ms{0.0};
    bool aborted{false};
};

struct ThroughputOptions {
    /// Packet size in bytes on the wire, frame header and CRC included.
    std::size_t size{64};
    /// Send size/64 frames of 64 bytes before each acknowledgement.
    bool chunked{false};
    std::size_t packets{1000};
    Nanos timeout{std::chrono::seconds(2)};
};

struct ThroughputResult {
    std::size_t size{0};
    bool chunked{false};
    std::size_t packets{0};
    std::uint64_t bytes_sent{0};
    std::uint64_t bytes_ok{0};
    double elapsed_s{0.0};
    std::size_t timeouts{0};
    bool aborted{false};

    /// Acknowledged bytes per second, in KiB/s.
    double kibps() const { return elapsed_s > 0 ? static_cast<double>(bytes_ok) / elapsed_s / 1024.0 : 0.0; }
};

struct BenchResult {
    std::string channel;
    std::optional<LatencyResult> latency;
    std::vector<ThroughputResult> throughput;
};

/// Repeating 0x00..0xFF pattern of length n.
Bytes make_pattern(std::size_t n);

/// Frames making up packet `index` of a throughput run. The last frame asks
/// for an acknowledgement. Throws std::invalid_argument on sizes that cannot
/// be framed (below kMinPacketSize, or not a multiple of 64 when chunked).
std::vector<protocol::ThroughputData> packet_frames(std::uint32_t first_seq, std::size_t size, bool chunked);

/// Wire size of a ThroughputData frame.
std::size_t frame_size(const protocol::ThroughputData& d);

/// Client side of both benchmarks. Runs on an event loop; the owner forwards
/// incoming messages to handle() and provides the send function.
class BenchClient {
public:
    using Sender = std::function<void(const Message&)>;

    BenchClient(transport::EventLoop& loop, Sender send);
    ~BenchClient();
    BenchClient(const BenchClient&) = delete;
    BenchClient& operator=(const BenchClient&) = delete;

    void start_latency(const LatencyOptions& opts, std::function<void(const LatencyResult&)> done);
    void start_throughput(const ThroughputOptions& opts, std::function<void(const ThroughputResult&)> done);

    /// Consumes LatencyEcho and ThroughputAck; returns false for anything else.
    bool handle(const Message& msg);
    /// Ends the running benchmark early (link lost) and reports what it has.
    void abort();
    bool busy() const { return mode_ != Mode::Idle; }

private:
    enum class Mode { Idle, Latency, Throughput };

    void send_probe();
    void on_probe_timeout();
    void finish_latency(bool aborted);
    void send_packet();
    void on_ack_timeout();
    void finish_throughput(bool aborted);
    void arm(Nanos timeout, void (BenchClient::*fn)());

    transport::EventLoop& loop_;
    Sender send_;
    Mode mode_{Mode::Idle};
    std::optional<transport::EventLoop::TimerId> timer_;
    std::shared_ptr<bool> alive_;

    LatencyOptions lat_opts_;
    LatencyResult lat_;
    std::function<void(const LatencyResult&)> lat_done_;
    std::uint64_t next_probe_id_{1};
    std::uint64_t outstanding_id_{0};
    Nanos probe_sent_at_{0};
    std::vector<double> rtts_ms_;

    ThroughputOptions tp_opts_;
    ThroughputResult tp_;
    std::function<void(const ThroughputResult&)> tp_done_;
    std::uint32_t next_seq_{0};
    std::size_t packets_done_{0};
    Nanos tp_start_{0};
};

struct ResponderStats {
    std::uint64_t echoes{0};
    std::uint64_t acks{0};
    std::uint64_t dropped_replies{0};
    std::uint64_t pattern_errors{0};
};

/// Peer side: echoes probes and acknowledges throughput data. Pattern bytes
/// that do not match are excluded from the acknowledged count.
class BenchResponder {
public:
    using Sender = std::function<void(const Message&)>;
    /// Returns true to suppress a reply (loss injection).
    using DropFilter = std::function<bool(const Message& reply)>;

    explicit BenchResponder(Sender send) : send_(std::move(send)) {}

    /// Consumes LatencyProbe and ThroughputData; returns false otherwise.
    bool handle(const Message& msg);
    void set_drop_filter(DropFilter f) { drop_ = std::move(f); }
    const ResponderStats& stats() const { return stats_; }

private:
    void reply(const Message& m);

    Sender send_;
    DropFilter drop_;
    std::uint64_t pending_ok_{0};
    ResponderStats stats_;
};

struct BenchPlan {
    bool latency{true};
    LatencyOptions latency_options;
    std::vector<std::size_t> sizes{kTableSizes.begin(), kTableSizes.end()};
    bool chunked{false};
    std::size_t packets{1000};
    Nanos ack_timeout{std::chrono::seconds(2)};
};

/// Runs the plan to completion on `loop` (latency first, then each size in
/// order). Stops early if `client` is aborted.
BenchResult run_bench(transport::EventLoop& loop, BenchClient& client, const BenchPlan& plan,
                      std::string channel);

/// Runs the plan over an in-process pipe on a virtual clock, with the client
/// side shaped by `params`. `drop` optionally suppresses responder replies.
BenchResult simulate_bench(const transport::ShapingParams& params, const BenchPlan& plan,
                           std::string channel = "sim", BenchResponder::DropFilter drop = {});

/// Long-format CSV: quantity,buffer_size,channel,value,std,loss.
std::string report_csv(const std::vector<BenchResult>& results);

/// Wide table with one column per channel.
std::string report_table(const std::vector<BenchResult>& results);

/// Wire size of a latency probe frame.
std::size_t probe_frame_size();

}  // namespace roboplat::commbench
