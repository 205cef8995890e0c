#include "roboplat/commbench/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "roboplat/protocol/codec.hpp"
#include "roboplat/transport/framed_link.hpp"

namespace roboplat::commbench {

using protocol::LatencyEcho;
using protocol::LatencyProbe;
using protocol::ThroughputAck;
using protocol::ThroughputData;

Bytes make_pattern(std::size_t n) {
    Bytes b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(i & 0xFF);
    return b;
}

std::size_t frame_size(const ThroughputData& d) { return protocol::kFrameOverhead + 4 + d.pattern.size(); }

std::size_t probe_frame_size() { return protocol::kFrameOverhead + 8; }

std::vector<ThroughputData> packet_frames(std::uint32_t first_seq, std::size_t size, bool chunked) {
    std::size_t count = 1;
    std::size_t each = size;
    if (chunked) {
        if (size < kChunkSize || size % kChunkSize != 0)
            throw std::invalid_argument("chunked size must be a positive multiple of 64");
        count = size / kChunkSize;
        each = kChunkSize;
    } else if (size < kMinPacketSize || size - protocol::kFrameOverhead > protocol::kMaxPayload) {
        throw std::invalid_argument("packet size out of range: " + std::to_string(size));
    }
    std::vector<ThroughputData> out;
    out.reserve(count);
    const Bytes pattern = make_pattern(each - kMinPacketSize);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t seq = (first_seq + static_cast<std::uint32_t>(i)) & ~ThroughputData::kAckRequest;
        if (i + 1 == count) seq |= ThroughputData::kAckRequest;
        out.push_back(ThroughputData{seq, pattern});
    }
    return out;
}

// ------------------------------------------------------------- BenchClient

BenchClient::BenchClient(transport::EventLoop& loop, Sender send)
    : loop_(loop), send_(std::move(send)), alive_(std::make_shared<bool>(true)) {}

BenchClient::~BenchClient() {
    *alive_ = false;
    if (timer_) loop_.cancel(*timer_);
}

void BenchClient::arm(Nanos timeout, void (BenchClient::*fn)()) {
    if (timer_) loop_.cancel(*timer_);
    timer_ = loop_.call_after(timeout, [this, alive = alive_, fn] {
        if (!*alive) return;
        timer_.reset();
        (this->*fn)();
    });
}

void BenchClient::start_latency(const LatencyOptions& opts, std::function<void(const LatencyResult&)> done) {
    if (busy()) throw std::logic_error("benchmark already running");
    mode_ = Mode::Latency;
    lat_opts_ = opts;
    lat_ = LatencyResult{};
    lat_done_ = std::move(done);
    rtts_ms_.clear();
    rtts_ms_.reserve(opts.rounds * opts.probes_per_round);
    send_probe();
}

void BenchClient::send_probe() {
    if (lat_.sent == lat_opts_.rounds * lat_opts_.probes_per_round) {
        finish_latency(false);
        return;
    }
    outstanding_id_ = next_probe_id_++;
    probe_sent_at_ = loop_.now();
    ++lat_.sent;
    arm(lat_opts_.timeout, &BenchClient::on_probe_timeout);
    send_(LatencyProbe{outstanding_id_});
}

void BenchClient::on_probe_timeout() {
    ++lat_.timeouts;
    outstanding_id_ = 0;
    send_probe();
}

void BenchClient::finish_latency(bool aborted) {
    if (timer_) loop_.cancel(*timer_);
    timer_.reset();
    mode_ = Mode::Idle;
    lat_.aborted = aborted;
    const auto n = rtts_ms_.size();
    if (n > 0) {
        double sum = 0;
        for (double r : rtts_ms_) sum += r;
        lat_.mean_ms = sum / static_cast<double>(n);
        double ss = 0;
        for (double r : rtts_ms_) ss += (r - lat_.mean_ms) * (r - lat_.mean_ms);
        lat_.std_ms = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    }
    auto done = std::move(lat_done_);
    lat_done_ = nullptr;
    if (done) done(lat_);
}

void BenchClient::start_throughput(const ThroughputOptions& opts, std::function<void(const ThroughputResult&)> done) {
    if (busy()) throw std::logic_error("benchmark already running");
    packet_frames(0, opts.size, opts.chunked);  // validates the size
    mode_ = Mode::Throughput;
    tp_opts_ = opts;
    tp_ = ThroughputResult{};
    tp_.size = opts.size;
    tp_.chunked = opts.chunked;
    tp_.packets = opts.packets;
    tp_done_ = std::move(done);
    packets_done_ = 0;
    tp_start_ = loop_.now();
    send_packet();
}

void BenchClient::send_packet() {
    if (packets_done_ == tp_opts_.packets) {
        finish_throughput(false);
        return;
    }
    const auto frames = packet_frames(next_seq_, tp_opts_.size, tp_opts_.chunked);
    next_seq_ = (next_seq_ + static_cast<std::uint32_t>(frames.size())) & ~ThroughputData::kAckRequest;
    arm(tp_opts_.timeout, &BenchClient::on_ack_timeout);
    for (const auto& f : frames) {
        tp_.bytes_sent += frame_size(f);
        send_(f);
    }
}

void BenchClient::on_ack_timeout() {
    ++tp_.timeouts;
    ++packets_done_;
    send_packet();
}

void BenchClient::finish_throughput(bool aborted) {
    if (timer_) loop_.cancel(*timer_);
    timer_.reset();
    mode_ = Mode::Idle;
    tp_.aborted = aborted;
    tp_.elapsed_s = std::chrono::duration<double>(loop_.now() - tp_start_).count();
    auto done = std::move(tp_done_);
    tp_done_ = nullptr;
    if (done) done(tp_);
}

bool BenchClient::handle(const Message& msg) {
    if (const auto* echo = std::get_if<LatencyEcho>(&msg)) {
        if (mode_ == Mode::Latency && outstanding_id_ != 0 && echo->probe_id == outstanding_id_) {
            const double rtt = std::chrono::duration<double, std::milli>(loop_.now() - probe_sent_at_).count();
            rtts_ms_.push_back(rtt);
            ++lat_.received;
            outstanding_id_ = 0;
            send_probe();
        } else {
            ++lat_.mismatched;
        }
        return true;
    }
    if (const auto* ack = std::get_if<ThroughputAck>(&msg)) {
        // An acknowledgement with no timer armed arrived after its timeout.
        if (mode_ == Mode::Throughput && timer_) {
            tp_.bytes_ok += ack->bytes_ok;
            ++packets_done_;
            send_packet();
        }
        return true;
    }
    return false;
}

void BenchClient::abort() {
    if (mode_ == Mode::Latency) finish_latency(true);
    else if (mode_ == Mode::Throughput) finish_throughput(true);
}

// ---------------------------------------------------------- BenchResponder

void BenchResponder::reply(const Message& m) {
    if (drop_ && drop_(m)) {
        ++stats_.dropped_replies;
        return;
    }
    send_(m);
}

bool BenchResponder::handle(const Message& msg) {
    if (const auto* probe = std::get_if<LatencyProbe>(&msg)) {
        ++stats_.echoes;
        reply(LatencyEcho{probe->probe_id});
        return true;
    }
    if (const auto* data = std::get_if<ThroughputData>(&msg)) {
        std::uint64_t bad = 0;
        for (std::size_t i = 0; i < data->pattern.size(); ++i)
            if (data->pattern[i] != static_cast<std::uint8_t>(i & 0xFF)) ++bad;
        stats_.pattern_errors += bad;
        pending_ok_ += frame_size(*data) - bad;
        if (data->seq & ThroughputData::kAckRequest) {
            const auto ok = pending_ok_;
            pending_ok_ = 0;
            ++stats_.acks;
            reply(ThroughputAck{ok});
        }
        return true;
    }
    return false;
}

// ------------------------------------------------------------------ runner

BenchResult run_bench(transport::EventLoop& loop, BenchClient& client, const BenchPlan& plan, std::string channel) {
    BenchResult result;
    result.channel = std::move(channel);
    const Nanos no_limit = Nanos::max() / 2;

    const auto wait = [&](const bool& done) {
        loop.run_until_condition([&] { return done; }, no_limit);
        if (!done) client.abort();
    };

    if (plan.latency) {
        bool done = false;
        client.start_latency(plan.latency_options, [&](const LatencyResult& r) {
            result.latency = r;
            done = true;
        });
        wait(done);
        if (result.latency->aborted) return result;
    }
    for (const auto size : plan.sizes) {
        bool done = false;
        ThroughputOptions opts;
        opts.size = size;
        opts.chunked = plan.chunked;
        opts.packets = plan.packets;
        opts.timeout = plan.ack_timeout;
        client.start_throughput(opts, [&](const ThroughputResult& r) {
            result.throughput.push_back(r);
            done = true;
        });
        wait(done);
        if (result.throughput.back().aborted) break;
    }
    return result;
}

BenchResult simulate_bench(const transport::ShapingParams& params, const BenchPlan& plan, std::string channel,
                           BenchResponder::DropFilter drop) {
    transport::SimLoop loop;
    auto [near_end, far_end] = transport::make_pipe(loop, "pipe:bench", "pipe:responder");

    std::unique_ptr<transport::FramedLink> server_link;
    BenchResponder responder([&](const Message& m) { server_link->send(m); });
    responder.set_drop_filter(std::move(drop));
    server_link = std::make_unique<transport::FramedLink>(far_end, [&](const Message& m) { responder.handle(m); });

    std::unique_ptr<transport::FramedLink> client_link;
    BenchClient client(loop, [&](const Message& m) { client_link->send(m); });
    client_link = std::make_unique<transport::FramedLink>(transport::shape(near_end, params),
                                                          [&](const Message& m) { client.handle(m); });

    auto result = run_bench(loop, client, plan, std::move(channel));
    client_link.reset();
    server_link.reset();
    return result;
}

// ----------------------------------------------------------------- reports

namespace {

std::string fmt(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

// RFC 4180 quoting, needed when a channel name is a shaping spec.
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

}  // namespace

std::string report_csv(const std::vector<BenchResult>& results) {
    std::string out = "quantity,buffer_size,channel,value,std,loss\n";
    for (const auto& r : results) {
        const auto channel = csv_field(r.channel);
        if (r.latency) {
            out += "latency_ms," + std::to_string(probe_frame_size()) + "," + channel + "," +
                   fmt(r.latency->mean_ms, 4) + "," + fmt(r.latency->std_ms, 4) + "," +
                   std::to_string(r.latency->timeouts) + "\n";
        }
        auto tps = r.throughput;
        std::stable_sort(tps.begin(), tps.end(), [](const auto& a, const auto& b) { return a.size < b.size; });
        for (const auto& t : tps) {
            out += std::string(t.chunked ? "throughput_chunked_KiBps," : "throughput_KiBps,") + std::to_string(t.size) +
                   "," + channel + "," + fmt(t.kibps(), 4) + ",," + std::to_string(t.timeouts) + "\n";
        }
    }
    return out;
}

std::string report_table(const std::vector<BenchResult>& results) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"Quantity", "Buffer Size (Bytes)"};
    for (const auto& r : results) header.push_back(r.channel);
    rows.push_back(header);

    const bool any_latency = std::any_of(results.begin(), results.end(), [](const auto& r) { return r.latency; });
    if (any_latency) {
        std::vector<std::string> row{"Latency (ms)", std::to_string(probe_frame_size())};
        for (const auto& r : results) row.push_back(r.latency ? fmt(r.latency->mean_ms, 1) : "-");
        rows.push_back(row);
    }
    std::set<std::size_t> sizes;
    for (const auto& r : results)
        for (const auto& t : r.throughput) sizes.insert(t.size);
    bool first = true;
    for (const auto size : sizes) {
        std::vector<std::string> row{first ? "Throughput (KiBps)" : "", std::to_string(size)};
        first = false;
        for (const auto& r : results) {
            const auto it = std::find_if(r.throughput.begin(), r.throughput.end(),
                                         [size](const auto& t) { return t.size == size; });
            row.push_back(it == r.throughput.end() ? "-" : fmt(it->kibps(), 1));
        }
        rows.push_back(row);
    }

    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto& row : rows) {
        std::string line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            line += row[c];
            if (c + 1 < row.size()) line += std::string(width[c] - row[c].size() + 2, ' ');
        }
        out += line + "\n";
    }
    return out;
}

}  // namespace roboplat::commbench
