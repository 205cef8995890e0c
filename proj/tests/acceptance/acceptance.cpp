// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/interp_oracle.hpp"
#include "../support/message_gen.hpp"
#include "../support/record_gen.hpp"
#include "../support/synthetic_session.hpp"
#include "../support/temp_dir.hpp"
#include "roboplat/bridge/bridge.hpp"
#include "roboplat/commbench/bench.hpp"
#include "roboplat/dataset/line_codec.hpp"
#include "roboplat/dataset/session.hpp"
#include "roboplat/protocol/codec.hpp"
#include "roboplat/protocol/handshake.hpp"
#include "roboplat/station/station.hpp"
#include "roboplat/tools/euroc_export.hpp"
#include "roboplat/tools/imu_align.hpp"
#include "roboplat/tools/timing_stats.hpp"
#include "roboplat/tools/validate.hpp"

namespace fs = std::filesystem;
using namespace roboplat;
using namespace std::chrono_literals;
using Clock = std::chrono::steady_clock;
using transport::Nanos;

namespace {

struct Outcome {
    bool pass{true};
    std::vector<std::string> details;

    void check(bool ok, const std::string& what) {
        details.push_back(std::string(ok ? "ok   " : "MISS ") + what);
        pass = pass && ok;
    }
};

std::string f(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
    return buf;
}

double secs_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ------------------------------------------------------------------ dataset

Outcome format_roundtrip() {
    Outcome o;
    const auto t0 = Clock::now();
    testsupport::RecordGenerator gen(20240611);
    constexpr std::size_t kTotal = 100'000;
    std::size_t ok = 0, n = 0;
    std::string first_bad;
    for (std::size_t i = 0; i < kTotal; ++i) {
        const auto schema = dataset::kAllSchemas[i % dataset::kAllSchemas.size()];
        const auto r = gen.make(schema);
        const auto line = dataset::write_line(r);
        ++n;
        if (dataset::parse_line(line, schema) == r)
            ++ok;
        else if (first_bad.empty())
            first_bad = line;
    }
    const double dt = secs_since(t0);
    o.check(ok == n, std::to_string(ok) + "/" + std::to_string(n) + " records equal after write+parse" +
                         (first_bad.empty() ? "" : " (first mismatch: " + first_bad + ")"));
    o.check(dt < 10.0, f("runtime %.2f s < 10 s", dt));
    return o;
}

Outcome stats_oracle() {
    Outcome o;
    testsupport::TempDir tmp;
    const auto root = tmp.path() / "s";
    const double sigma = 2e-3;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> jitter(0.0, sigma * 1e9);
    std::vector<std::int64_t> ts{1'000'000'000};
    for (int i = 1; i < 6000; ++i) ts.push_back(ts.back() + std::llround(1e7 + jitter(rng)));
    {
        auto w = dataset::SessionWriter::open(root, {dataset::StreamKind::Gyro});
        for (auto t : ts) w.append(dataset::StreamKind::Gyro, dataset::ImuSample{t, {0, 0, 0}, {}, 0});
    }
    // Oracle: direct two-pass statistics over the generated periods.
    double sum = 0;
    for (std::size_t i = 1; i < ts.size(); ++i) sum += static_cast<double>(ts[i] - ts[i - 1]);
    const double mean_ns = sum / static_cast<double>(ts.size() - 1);
    double ss = 0;
    for (std::size_t i = 1; i < ts.size(); ++i) ss += std::pow(static_cast<double>(ts[i] - ts[i - 1]) - mean_ns, 2);
    const double std_ns = std::sqrt(ss / static_cast<double>(ts.size() - 2));

    const auto report = tools::compute_stats(dataset::read_session(root));
    if (report.rows.size() != 1) {
        o.check(false, "expected one stats row, got " + std::to_string(report.rows.size()));
        return o;
    }
    const auto& r = report.rows[0];
    o.check(std::abs(r.mean_period_s - 0.01) <= 0.02 * 0.01, f("mean period %.6f s within 2%% of 0.010", r.mean_period_s));
    o.check(std::abs(r.period_std_s - sigma) <= 0.1 * sigma, f("period std %.6f s within 10%% of %.4f", r.period_std_s, sigma));
    o.check(std::abs(r.mean_period_s - mean_ns * 1e-9) <= 1e-12 && std::abs(r.period_std_s - std_ns * 1e-9) <= 1e-12,
            f("matches direct oracle (mean %.9f, std %.9f)", mean_ns * 1e-9, std_ns * 1e-9));
    const double consistency = r.duration_s / static_cast<double>(r.sample_count - 1);
    o.check(std::abs(r.mean_period_s - consistency) <= 1e-12 * consistency,
            f("mean %.9f == duration/(count-1) %.9f", r.mean_period_s, consistency));
    return o;
}

Outcome alignment_oracle() {
    Outcome o;
    std::mt19937_64 rng(1000);
    std::uniform_int_distribution<std::int64_t> step(0, 25'000'000);
    std::uniform_int_distribution<int> len(2, 80);
    std::normal_distribution<double> val(0.0, 5.0);
    double worst = 0;
    std::size_t size_mismatch = 0, ts_mismatch = 0, rows = 0, disjoint = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        std::vector<dataset::ImuSample> gyro, accel;
        std::int64_t t = step(rng);
        const int ng = len(rng), na = len(rng);
        // step may be 0, so repeated timestamps occur in both streams.
        for (int i = 0; i < ng; ++i, t += step(rng)) gyro.push_back({t, {val(rng), val(rng), val(rng)}, {}, 0});
        t = step(rng);
        for (int i = 0; i < na; ++i, t += step(rng)) accel.push_back({t, {val(rng), val(rng), val(rng)}, {}, 0});
        const auto expect = testsupport::brute_force_align(gyro, accel);
        std::vector<tools::AlignedImuRow> got;
        try {
            got = tools::align_imu(gyro, accel).rows;
        } catch (const dataset::DatasetError&) {
            // Disjoint time ranges are rejected; the oracle must agree there is nothing to align.
            ++disjoint;
            if (!expect.empty()) ++size_mismatch;
            continue;
        }
        if (got.size() != expect.size()) {
            ++size_mismatch;
            continue;
        }
        for (std::size_t i = 0; i < got.size(); ++i, ++rows) {
            if (got[i].timestamp_ns != expect[i].timestamp_ns || got[i].accel != expect[i].accel) ++ts_mismatch;
            for (int k = 0; k < 3; ++k) {
                const double rel = std::abs(got[i].gyro[k] - expect[i].gyro[k]) / std::max(1.0, std::abs(expect[i].gyro[k]));
                worst = std::max(worst, rel);
            }
        }
    }
    o.check(size_mismatch == 0 && ts_mismatch == 0,
            "1000 instances (" + std::to_string(disjoint) + " disjoint), " + std::to_string(rows) +
                " rows, row sets identical");
    o.check(worst < 1e-12, f("max relative diff %.3g < 1e-12", worst));
    return o;
}

Outcome euroc_export() {
    Outcome o;
    testsupport::TempDir tmp;
    testsupport::SyntheticSpec spec;
    spec.imu_samples = 500;
    spec.accel_offset_ns = 3'000'000;
    spec.accel_period_ns = 7'000'000;
    spec.camera = true;
    testsupport::write_synthetic_session(tmp.path() / "s", spec);
    const auto session = dataset::read_session(tmp.path() / "s");
    const auto r1 = tools::export_euroc(session, tmp.path() / "a");
    const auto r2 = tools::export_euroc(dataset::read_session(tmp.path() / "s"), tmp.path() / "b");
    const auto a = slurp(tmp.path() / "a/mav0/imu0/data.csv");
    const auto b = slurp(tmp.path() / "b/mav0/imu0/data.csv");
    o.check(!a.empty() && a == b, "imu0/data.csv byte-identical across reruns (" + std::to_string(a.size()) + " bytes)");

    // Oracle: accel timestamps inside the gyro span.
    const std::int64_t g_last = static_cast<std::int64_t>(spec.imu_samples - 1) * spec.gyro_period_ns;
    std::size_t expect = 0;
    for (std::size_t i = 0; i < spec.imu_samples; ++i) {
        const auto ta = static_cast<std::int64_t>(i) * spec.accel_period_ns + spec.accel_offset_ns;
        if (ta >= 0 && ta <= g_last) ++expect;
    }
    std::size_t data_lines = 0;
    std::istringstream in(a);
    for (std::string line; std::getline(in, line);)
        if (!line.empty() && line[0] != '#') ++data_lines;
    o.check(r1.imu_rows == expect && data_lines == expect && r2.imu_rows == expect,
            "row count " + std::to_string(data_lines) + " == oracle " + std::to_string(expect));
    return o;
}

// ----------------------------------------------------------------- protocol

Outcome protocol_props() {
    Outcome o;
    using namespace protocol;
    testsupport::MessageGenerator gen(0xC0DEC);

    // Round trip through one decoder, fed in random slices.
    std::vector<Message> sent;
    Bytes stream;
    for (int i = 0; i < 100'000; ++i) {
        sent.push_back(gen.make());
        const auto fr = encode(sent.back());
        stream.insert(stream.end(), fr.begin(), fr.end());
    }
    FrameDecoder dec;
    std::vector<Message> got;
    std::uniform_int_distribution<std::size_t> slice(1, 4096);
    for (std::size_t pos = 0; pos < stream.size();) {
        const auto n = std::min(slice(gen.rng()), stream.size() - pos);
        dec.feed(std::span(stream).subspan(pos, n));
        pos += n;
        while (auto m = dec.next()) got.push_back(std::move(*m));
    }
    o.check(got == sent, std::to_string(got.size()) + "/100000 messages decoded equal, in order");

    // Exhaustive single-bit flips over frames with payloads of at most 16 bytes.
    std::vector<Bytes> frames;
    for (std::size_t v = 0; v < testsupport::MessageGenerator::kVariants; ++v) {
        for (int k = 0, tries = 0; k < 12 && tries < 5000; ++tries) {
            const auto m = gen.make(v);
            if (encode_payload(m).size() > 16) continue;
            frames.push_back(encode(m));
            ++k;
        }
    }
    const Bytes sentinel = encode(LatencyProbe{0x5EA1});
    const Bytes filler(kMaxPayload + kFrameOverhead, 0x00);
    std::size_t flips = 0, accepted = 0, lost_sentinel = 0;
    for (const auto& fr : frames) {
        for (std::size_t bit = 0; bit < fr.size() * 8; ++bit) {
            Bytes bad = fr;
            bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
            FrameDecoder d;
            d.feed(bad);
            std::vector<Message> out;
            while (auto m = d.next()) out.push_back(*m);
            // A flipped length may leave the decoder waiting; flush it out.
            if (d.buffered() > 0) {
                d.feed(filler);
                while (auto m = d.next()) out.push_back(*m);
            }
            d.feed(sentinel);
            while (auto m = d.next()) out.push_back(*m);
            ++flips;
            if (out.empty() || !(out.back() == Message(LatencyProbe{0x5EA1}))) ++lost_sentinel;
            if (out.size() > 1 || (out.size() == 1 && !(out[0] == Message(LatencyProbe{0x5EA1})))) ++accepted;
        }
    }
    o.check(accepted == 0, std::to_string(flips) + " single-bit flips over " + std::to_string(frames.size()) +
                               " frames, " + std::to_string(accepted) + " accepted");
    o.check(lost_sentinel == 0, "decoder recovered the following frame after every flip");

    // Resynchronisation: garbage (with planted partial headers) between frames.
    std::mt19937_64 rng(77);
    Bytes noisy;
    std::vector<Message> good;
    for (int i = 0; i < 2000; ++i) {
        const auto n = std::uniform_int_distribution<int>(0, 40)(rng);
        for (int k = 0; k < n; ++k) {
            if (k % 9 == 0) {
                noisy.insert(noisy.end(), {kMagic0, kMagic1, kVersion, 0x10, 0, 0, 0, 2});
            } else {
                noisy.push_back(static_cast<std::uint8_t>(rng()));
            }
        }
        good.push_back(gen.make());
        const auto fr = encode(good.back());
        noisy.insert(noisy.end(), fr.begin(), fr.end());
    }
    noisy.insert(noisy.end(), filler.begin(), filler.end());
    FrameDecoder rd;
    rd.feed(noisy);
    std::vector<Message> recovered;
    while (auto m = rd.next()) recovered.push_back(*m);
    std::size_t j = 0;
    for (const auto& m : recovered)
        if (j < good.size() && m == good[j]) ++j;
    o.check(j == good.size(), std::to_string(j) + "/" + std::to_string(good.size()) +
                                  " frames recovered in order after garbage (" + std::to_string(recovered.size()) +
                                  " decoded)");
    return o;
}

// ---------------------------------------------------------------- handshake

enum class Answer { Correct, Echo, Truncated, Empty };

struct FakeBridge {
    transport::ConnectionPtr conn;
    std::unique_ptr<transport::FramedLink> link;
    std::size_t commands{0};
    bool closed{false};

    FakeBridge(transport::SimLoop& loop, Answer mode) {
        using namespace protocol;
        conn = transport::connect(loop, transport::Endpoint::pipe("ctl"));
        link = std::make_unique<transport::FramedLink>(
            conn,
            [this, mode](const Message& m) {
                if (const auto* r = std::get_if<TestRequest>(&m)) {
                    Bytes a = handshake_answer(r->challenge);
                    if (mode == Answer::Echo) a = r->challenge;
                    if (mode == Answer::Truncated) a.pop_back();
                    if (mode == Answer::Empty) a.clear();
                    link->send(TestResponse{a});
                }
                if (std::holds_alternative<CmdDigital>(m) || std::holds_alternative<CmdPwm>(m)) ++commands;
            },
            [this] { closed = true; });
    }
};

Outcome handshake() {
    Outcome o;
    using namespace protocol;
    std::mt19937_64 rng(3);
    bool fn_ok = true;
    for (int i = 0; i < 1000; ++i) {
        Bytes c(std::uniform_int_distribution<std::size_t>(1, 64)(rng));
        for (auto& b : c) b = static_cast<std::uint8_t>(rng());
        const Bytes rev(c.rbegin(), c.rend());
        Bytes truncated = rev;
        truncated.pop_back();
        const bool palindrome = rev == c;
        fn_ok = fn_ok && verify_handshake(c, rev) && (palindrome || !verify_handshake(c, c)) &&
                !verify_handshake(c, truncated) && !verify_handshake(c, {});
    }
    o.check(fn_ok, "reversed answer accepted; echo, truncated and empty rejected (1000 challenges)");

    const std::pair<Answer, const char*> modes[] = {
        {Answer::Echo, "echo"}, {Answer::Truncated, "truncated"}, {Answer::Empty, "empty"}};
    for (const auto& [mode, name] : modes) {
        transport::SimLoop loop;
        station::StationOptions so;
        so.control = transport::Endpoint::pipe("ctl");
        so.seed = 5;
        station::Station st(loop, so);
        FakeBridge fb(loop, mode);
        std::size_t accepted = 0;
        // Commands fired before, during and after the failed handshake.
        for (int i = 0; i < 50; ++i) {
            if (st.submit_command(CmdDigital{0, 1}) == station::SubmitStatus::Accepted) ++accepted;
            if (st.submit_command(CmdPwm{{500, 500, 500, 500}}) == station::SubmitStatus::Accepted) ++accepted;
            loop.run_for(200us);
        }
        loop.run_for(10ms);
        o.check(fb.closed && fb.commands == 0 && accepted == 0 && st.phase() == station::Phase::Listening,
                std::string(name) + " answer: dropped, 0 commands on the wire, 0 accepted submissions");
    }
    {
        transport::SimLoop loop;
        station::StationOptions so;
        so.control = transport::Endpoint::pipe("ctl");
        station::Station st(loop, so);
        FakeBridge fb(loop, Answer::Correct);
        loop.run_for(1ms);
        const bool ok = st.verified() && st.submit_command(CmdDigital{0, 1}) == station::SubmitStatus::Accepted;
        loop.run_for(1ms);
        o.check(ok && fb.commands == 1, "correct answer: verified and commands pass");
    }
    return o;
}

// -------------------------------------------------------------------- bench

Outcome bench_closed_form() {
    Outcome o;
    const auto t0 = Clock::now();
    const double L = 0.005;
    struct Channel {
        const char* name;
        std::optional<double> bw;
    };
    const Channel channels[] = {{"L=5ms,B=inf", std::nullopt}, {"L=5ms,B=8KiB/s", 8192.0}};
    for (const auto& ch : channels) {
        transport::ShapingParams p;
        p.one_way_delay = Nanos(5ms);
        p.bandwidth_Bps = ch.bw;
        commbench::BenchPlan plan;
        const auto res = commbench::simulate_bench(p, plan, ch.name);
        const double lat = res.latency->mean_ms;
        o.check(std::abs(lat - 2 * L * 1e3) <= 0.05 * 2 * L * 1e3,
                std::string(ch.name) + f(": latency %.4f ms vs 2L = %.1f ms (%.2f%%)", lat, 2 * L * 1e3,
                                         100 * (lat - 2 * L * 1e3) / (2 * L * 1e3)));
        double prev = 0;
        bool monotone = true;
        for (const auto& t : res.throughput) {
            const double S = static_cast<double>(t.size);
            const double expect = S / (2 * L + (ch.bw ? S / *ch.bw : 0.0)) / 1024.0;
            const double got = t.kibps();
            o.check(std::abs(got - expect) <= 0.05 * expect && t.timeouts == 0,
                    std::string(ch.name) + f(": S=%.0f throughput %.4f KiB/s vs %.4f (%.3f%%)", S, got, expect,
                                             100 * (got - expect) / expect));
            monotone = monotone && got > prev;
            prev = got;
        }
        o.check(monotone, std::string(ch.name) + ": throughput increases with buffer size");

        commbench::BenchPlan one;
        one.latency = false;
        one.sizes = {commbench::kChunkSize};
        auto chunked = one;
        chunked.chunked = true;
        const auto a = commbench::simulate_bench(p, one, ch.name).throughput.at(0);
        const auto b = commbench::simulate_bench(p, chunked, ch.name).throughput.at(0);
        o.check(a.bytes_ok == b.bytes_ok && a.bytes_sent == b.bytes_sent && a.elapsed_s == b.elapsed_s,
                std::string(ch.name) + f(": chunked N_s=1 identical to non-chunked (%.4f == %.4f KiB/s)", a.kibps(),
                                         b.kibps()));
    }
    const double dt = secs_since(t0);
    o.check(dt < 60.0, f("runtime %.2f s < 60 s", dt));
    return o;
}

// --------------------------------------------------------------- end to end

Outcome end_to_end() {
    Outcome o;
    testsupport::TempDir tmp;
    const auto rec = tmp.path() / "rec";
    std::istringstream script(R"({"t_ms":0,"type":"digital","line":1,"value":1}
{"t_ms":0,"type":"digital","line":0,"value":1}
{"t_ms":1000,"type":"digital","line":1,"value":0}
{"t_ms":2000,"type":"end"}
)");
    transport::SimLoop loop;
    station::StationOptions so;
    so.control = transport::Endpoint::pipe("ctl");
    so.seed = 9;
    station::Station st(loop, so);
    station::ScriptRunner runner(loop, st, station::parse_script(script), [&] { st.stop(); });

    bridge::BridgeOptions bo;
    bo.server = transport::Endpoint::pipe("ctl");
    bo.record_dir = rec;
    // Stand-in for the wireless hop between station and bridge.
    bo.upstream_shaping = transport::parse_shaping("delay=5ms,bw=inf,jitter=1ms,seed=4");
    auto bridge = bridge::BridgeProcess::launch(loop, bo);
    loop.run_until_condition([&] { return bridge->node().finished(); }, loop.now() + Nanos(10s));
    loop.run_for(50ms);

    const auto& dev = bridge->sim_device()->state();
    o.check(runner.done() && runner.results() == std::vector<station::SubmitStatus>(3, station::SubmitStatus::Accepted),
            "script replayed after verification, 3 commands accepted");
    o.check(std::abs(dev.car_pos_m) <= 0.02, f("final car position %.5f m, |pos| <= 0.02", dev.car_pos_m));
    o.check(bridge->node().exit() == bridge::BridgeExit::LinkLost && !dev.enable,
            std::string("bridge exit ") + bridge::exit_name(bridge->node().exit()) + ", enable=" +
                (dev.enable ? "1" : "0") + " after failsafe");

    const auto session = dataset::read_session(rec);
    const auto report = tools::validate(session);
    o.check(report.error_count() == 0, "validate: " + std::to_string(report.error_count()) + " errors");
    const auto* adc = session.find(dataset::StreamKind::Adc);
    std::map<int, std::vector<std::int64_t>> per;
    if (adc)
        for (const auto& r : adc->records) {
            const auto& s = std::get<dataset::AdcSample>(r);
            per[s.channel_id.value_or(-1)].push_back(s.timestamp_ns);
        }
    const auto cfg = dataset::read_calibration(rec / "calibration/device.txt");
    o.check(per.size() == std::stoul(cfg.at("adc_channels")), std::to_string(per.size()) + " ADC channels recorded");
    for (const auto& [ch, ts] : per) {
        const double span = static_cast<double>(ts.back() - ts.front()) * 1e-9;
        const double rate = span > 0 ? static_cast<double>(ts.size() - 1) / span : 0.0;
        o.check(std::abs(rate - 100.0) <= 5.0,
                f("channel %.0f: %.0f rows over %.3f s = %.2f rows/s (100 +- 5%%)", ch, static_cast<double>(ts.size()),
                  span, rate));
    }
    return o;
}

// ---------------------------------------------------------------- attitude

Outcome complementary_filter() {
    Outcome o;
    for (const double target : {0.3, -0.2}) {
        const bridge::Vec3 accel{-bridge::kGravity * std::sin(0.1) * std::cos(target),
                                 bridge::kGravity * std::sin(target) * std::cos(0.1),
                                 bridge::kGravity * std::cos(target) * std::cos(0.1)};
        const auto truth = bridge::accel_attitude(accel);
        bridge::Attitude a{};
        for (int i = 0; i < 500; ++i) a = bridge::complementary_filter(a, {0, 0, 0}, accel, 0.01);
        // Analytic roll of this gravity vector, computed independently.
        const double roll = std::atan2(accel[1], accel[2]);
        o.check(std::abs(a.roll - roll) < 1e-3 && std::abs(truth.roll - roll) < 1e-15,
                f("static tilt %.2f rad: roll after 5 s @100 Hz = %.6f, error %.2e < 1e-3", roll, a.roll,
                  std::abs(a.roll - roll)));
    }
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-3, 3);
    bridge::Attitude a{0.05, -0.07};
    double r = a.roll, p = a.pitch;
    double worst = 0;
    for (int i = 0; i < 10000; ++i) {
        const bridge::Vec3 g{u(rng), u(rng), u(rng)};
        const bridge::Vec3 acc{u(rng), u(rng), 9.81 + u(rng)};
        const double dt = 0.001 + 0.01 * std::abs(u(rng));
        a = bridge::complementary_filter(a, g, acc, dt, 1.0);
        r += g[0] * dt;
        p += g[1] * dt;
        worst = std::max({worst, std::abs(a.roll - r), std::abs(a.pitch - p)});
    }
    o.check(worst == 0.0, f("alpha=1 equals pure integration over 10000 steps, max diff %.3g", worst));
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"format_roundtrip", format_roundtrip},
        {"statistics_oracle", stats_oracle},
        {"alignment_oracle", alignment_oracle},
        {"euroc_export", euroc_export},
        {"protocol", protocol_props},
        {"handshake", handshake},
        {"bench_closed_form", bench_closed_form},
        {"end_to_end_teleop", end_to_end},
        {"complementary_filter", complementary_filter},
    };
    const std::string only = argc > 1 ? argv[1] : "";
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        if (!only.empty() && only != name) continue;
        Outcome out;
        try {
            out = fn();
        } catch (const std::exception& e) {
            out.check(false, std::string("exception: ") + e.what());
        }
        std::printf("%s %s\n", out.pass ? "PASS" : "FAIL", name.c_str());
        for (const auto& d : out.details) std::printf("    %s\n", d.c_str());
        std::fflush(stdout);
        failed += out.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria failed\n", failed, only.empty() ? criteria.size() : std::size_t{1});
    return failed == 0 ? 0 : 1;
}
