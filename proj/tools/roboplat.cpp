// roboplat: dataset tools, device simulator, bridge, station and benchmark.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "roboplat/bridge/bridge.hpp"
#include "roboplat/commbench/bench.hpp"
#include "roboplat/dataset/session.hpp"
#include "roboplat/device/device.hpp"
#include "roboplat/station/station.hpp"
#include "roboplat/tools/euroc_export.hpp"
#include "roboplat/tools/imu_align.hpp"
#include "roboplat/tools/timing_stats.hpp"
#include "roboplat/tools/validate.hpp"

namespace fs = std::filesystem;
using namespace roboplat;
using transport::Endpoint;
using transport::PollLoop;

namespace {

PollLoop* g_loop = nullptr;

extern "C" void on_signal(int) {
    if (g_loop) g_loop->request_stop_from_signal();
}

void install_signals(PollLoop& loop) {
    g_loop = &loop;
    struct sigaction sa {};
    sa.sa_handler = on_signal;
    sigemptyset(&sa.sa_mask);
    sigaction(SIGINT, &sa, nullptr);
    sigaction(SIGTERM, &sa, nullptr);
    std::signal(SIGPIPE, SIG_IGN);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string seconds(transport::Nanos t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", std::chrono::duration<double>(t).count());
    return buf;
}

protocol::PlantKind plant_of(const std::string& s) {
    return s == "quad" ? protocol::PlantKind::Quad : protocol::PlantKind::Car;
}

// ---------------------------------------------------------------- dataset

int cmd_stats(const fs::path& dir, const std::string& csv) {
    const auto session = dataset::read_session(dir);
    const auto report = tools::compute_stats(session);
    for (const auto& d : report.diagnostics) std::cerr << "note: " << d << "\n";
    std::cout << tools::stats_table(report);
    if (!csv.empty()) write_text(csv, tools::stats_csv(report));
    return 0;
}

int cmd_align(const fs::path& dir, const fs::path& out, int imu_id) {
    const auto session = dataset::read_session(dir);
    const auto pick = [&](dataset::StreamKind a, dataset::StreamKind b) -> const dataset::LoadedStream* {
        if (const auto* s = session.find(a); s && !s->records.empty()) return s;
        if (const auto* s = session.find(b); s && !s->records.empty()) return s;
        return nullptr;
    };
    const auto* gyro = pick(dataset::StreamKind::Gyro, dataset::StreamKind::GyroRaw);
    const auto* accel = pick(dataset::StreamKind::Accel, dataset::StreamKind::AccelRaw);
    if (!gyro || !accel) throw std::runtime_error("session has no gyro and accel data");
    const auto res = tools::align_imu(tools::imu_samples(gyro->records, imu_id), tools::imu_samples(accel->records, imu_id));
    write_text(out, tools::format_aligned_csv(
                        res.rows, "#timestamp [ns],w_x [rad s^-1],w_y [rad s^-1],w_z [rad s^-1],"
                                  "a_x [m s^-2],a_y [m s^-2],a_z [m s^-2]"));
    std::cout << res.rows.size() << " rows, " << res.dropped_outside << " accel samples outside the gyro span, "
              << res.dropped_duplicates << " duplicates\n";
    return 0;
}

int cmd_export(const fs::path& dir, const fs::path& out, const std::string& cam, int imu_id) {
    tools::EurocOptions o;
    if (!cam.empty()) o.camera_id = cam;
    o.imu_id = imu_id;
    const auto r = tools::export_euroc(dataset::read_session(dir), out, o);
    std::cout << "imu0: " << r.imu_rows << " rows (" << r.dropped_accel << " accel samples dropped)\n";
    if (r.camera_exported)
        std::cout << "cam0: " << r.camera_rows << " rows, " << r.images_copied << " images copied, " << r.images_missing
                  << " missing\n";
    for (const auto& n : r.notes) std::cout << "note: " << n << "\n";
    return 0;
}

int cmd_validate(const fs::path& dir) {
    const auto report = tools::validate(dataset::read_session(dir));
    for (const auto& d : report.diagnostics) std::cout << tools::format_diagnostic(d) << "\n";
    std::cout << report.error_count() << " errors, " << report.warning_count() << " warnings\n";
    return report.error_count() == 0 ? 0 : 1;
}

// ---------------------------------------------------------------- network

int cmd_device(const std::string& listen, device::DeviceConfig cfg) {
    cfg.validate();
    PollLoop loop;
    install_signals(loop);
    device::DeviceNode node(loop, cfg);
    transport::ListenOptions lo;
    lo.max_clients = 1;
    auto listener = transport::listen(
        loop, Endpoint::parse(listen), [&](transport::ConnectionPtr c) {
            std::cerr << "device: host connected (" << c->label() << ")\n";
            node.attach(std::move(c));
        },
        lo);
    std::cerr << "device listening on " << listener->address().to_string() << std::endl;
    loop.run();
    std::cerr << "device: " << node.counters().commands << " commands, " << node.counters().adc_reports
              << " ADC reports\n";
    const auto& s = node.state();
    char buf[128];
    std::snprintf(buf, sizeof buf, "device: final car_pos_m=%.4f enable=%d pwm=%u,%u,%u,%u\n", s.car_pos_m,
                  s.enable ? 1 : 0, s.pwm[0], s.pwm[1], s.pwm[2], s.pwm[3]);
    std::cerr << buf;
    return 0;
}

int cmd_bridge(bridge::BridgeOptions opts) {
    PollLoop loop;
    install_signals(loop);
    const int code = bridge::run_bridge(loop, opts);
    std::cerr << "bridge exit status " << code << "\n";
    return code;
}

int cmd_station(station::StationOptions opts, const std::string& script) {
    std::optional<std::vector<station::ScriptStep>> steps;
    if (!script.empty()) steps = station::load_script(script);
    PollLoop loop;
    install_signals(loop);
    const auto t0 = loop.now();
    std::cerr << "station listening on " << opts.control.to_string();
    if (opts.ui) std::cerr << ", ui on " << opts.ui->to_string();
    std::cerr << std::endl;
    return station::run_station(loop, opts, std::move(steps), [t0](const station::StationEvent& e) {
        std::cerr << "[" << seconds(e.at - t0) << "] " << e.text << std::endl;
    });
}

struct BenchArgs {
    std::string connect;
    std::string serve;
    bool simulate{false};
    std::vector<std::string> shapes;
    std::vector<std::size_t> sizes{commbench::kTableSizes.begin(), commbench::kTableSizes.end()};
    bool chunked{false};
    bool no_latency{false};
    std::size_t rounds{10};
    std::size_t probes{100};
    std::size_t packets{1000};
    std::string csv;
};

int bench_serve(const std::string& where) {
    PollLoop loop;
    install_signals(loop);
    struct Peer {
        std::unique_ptr<transport::FramedLink> link;
        std::unique_ptr<commbench::BenchResponder> responder;
    };
    std::map<std::uint64_t, Peer> peers;
    std::uint64_t next = 0;
    auto listener = transport::listen(loop, Endpoint::parse(where), [&](transport::ConnectionPtr c) {
        const auto id = next++;
        auto& p = peers[id];
        auto* slot = &p;
        p.responder = std::make_unique<commbench::BenchResponder>([slot](const protocol::Message& m) {
            if (slot->link && slot->link->is_open()) slot->link->send(m);
        });
        p.link = std::make_unique<transport::FramedLink>(
            c, [slot](const protocol::Message& m) { slot->responder->handle(m); },
            [&loop, &peers, id] { loop.post([&peers, id] { peers.erase(id); }); });
    });
    std::cerr << "bench responder on " << listener->address().to_string() << std::endl;
    loop.run();
    return 0;
}

int cmd_bench(const BenchArgs& a) {
    if (!a.serve.empty()) return bench_serve(a.serve);

    commbench::BenchPlan plan;
    plan.latency = !a.no_latency;
    plan.latency_options.rounds = a.rounds;
    plan.latency_options.probes_per_round = a.probes;
    plan.sizes = a.sizes;
    plan.chunked = a.chunked;
    plan.packets = a.packets;
    for (auto s : plan.sizes)
        if (s < commbench::kMinPacketSize) throw std::invalid_argument("packet size below " + std::to_string(commbench::kMinPacketSize));

    std::vector<commbench::BenchResult> results;
    if (a.simulate) {
        const auto shapes = a.shapes.empty() ? std::vector<std::string>{"delay=5ms,bw=inf"} : a.shapes;
        for (const auto& s : shapes) results.push_back(commbench::simulate_bench(transport::parse_shaping(s), plan, s));
    } else {
        if (a.connect.empty()) throw std::invalid_argument("one of --connect, --serve or --simulate is required");
        if (a.shapes.size() > 1) throw std::invalid_argument("only one --shape applies to a live connection");
        PollLoop loop;
        install_signals(loop);
        auto conn = transport::connect(loop, Endpoint::parse(a.connect));
        std::string channel = a.connect;
        if (!a.shapes.empty()) {
            conn = transport::shape(conn, transport::parse_shaping(a.shapes[0]));
            channel += " " + a.shapes[0];
        }
        std::unique_ptr<commbench::BenchClient> client;
        transport::FramedLink link(
            conn, [&](const protocol::Message& m) { client->handle(m); }, [&] { client->abort(); });
        client = std::make_unique<commbench::BenchClient>(loop, [&](const protocol::Message& m) {
            if (link.is_open()) link.send(m);
        });
        results.push_back(commbench::run_bench(loop, *client, plan, channel));
        link.close();
        loop.clear_stop();
        loop.run_for(std::chrono::milliseconds(20));
    }
    std::cout << commbench::report_table(results);
    if (!a.csv.empty()) write_text(a.csv, commbench::report_csv(results));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robot platform toolkit: datasets, device simulator, bridge, station, benchmark"};
    app.require_subcommand(1);
    int rc = 0;

    // stats
    std::string dir, out, csv, cam;
    int imu_id = 0;
    auto* stats = app.add_subcommand("stats", "Per-sensor timing statistics of a session");
    stats->add_option("session", dir, "Session directory")->required()->check(CLI::ExistingDirectory);
    stats->add_option("--csv", csv, "Also write the report as CSV");
    stats->callback([&] { rc = cmd_stats(dir, csv); });

    auto* align = app.add_subcommand("align", "Align accelerometer samples to gyro timestamps");
    align->add_option("session", dir, "Session directory")->required()->check(CLI::ExistingDirectory);
    align->add_option("-o,--output", out, "Output CSV")->required();
    align->add_option("--imu-id", imu_id, "IMU sensor id");
    align->callback([&] { rc = cmd_align(dir, out, imu_id); });

    auto* euroc = app.add_subcommand("export-euroc", "Export a session in EuRoC layout");
    euroc->add_option("session", dir, "Session directory")->required()->check(CLI::ExistingDirectory);
    euroc->add_option("out", out, "Output directory")->required();
    euroc->add_option("--cam", cam, "Camera id (first camera by default)");
    euroc->add_option("--imu-id", imu_id, "IMU sensor id");
    euroc->callback([&] { rc = cmd_export(dir, out, cam, imu_id); });

    auto* validate = app.add_subcommand("validate", "Check a session for format problems");
    validate->add_option("session", dir, "Session directory")->required()->check(CLI::ExistingDirectory);
    validate->callback([&] { rc = cmd_validate(dir); });

    // device
    std::string listen;
    device::DeviceConfig dcfg;
    int rate = 100, bits = 10, channels = 2;
    std::string plant = "car";
    auto* dev = app.add_subcommand("device", "Run the simulated microcontroller");
    dev->add_option("--listen", listen, "Endpoint to serve the host link on")->required();
    dev->add_option("--rate", rate, "ADC sample rate in Hz")->check(CLI::Range(1, 1000));
    dev->add_option("--bits", bits, "ADC resolution in bits")->check(CLI::Range(8, 16));
    dev->add_option("--channels", channels, "ADC channel count")->check(CLI::Range(1, 255));
    dev->add_option("--plant", plant, "Simulated plant")->check(CLI::IsMember({"car", "quad"}));
    dev->callback([&] {
        dcfg.sample_rate_hz = static_cast<std::uint16_t>(rate);
        dcfg.resolution_bits = static_cast<std::uint8_t>(bits);
        dcfg.channels = static_cast<std::uint8_t>(channels);
        dcfg.plant = plant_of(plant);
        rc = cmd_device(listen, dcfg);
    });

    // bridge
    std::string server, device_ep = "spawn-sim", record, bplant, up_shape;
    int poll_ms = 10;
    std::uint64_t seed = 1;
    auto* br = app.add_subcommand("bridge", "Relay between the station and the device");
    br->add_option("--server", server, "Station control endpoint")->required();
    br->add_option("--device", device_ep, "Device endpoint, or spawn-sim for an in-process simulator");
    br->add_option("--record", record, "Record ADC data into a new session directory");
    br->add_option("--poll-ms", poll_ms, "ADC poll period in ms")->check(CLI::Range(1, 10000));
    br->add_option("--plant", bplant, "Override the plant reported by the device")->check(CLI::IsMember({"car", "quad"}));
    br->add_option("--rate", rate, "Spawned simulator ADC rate in Hz")->check(CLI::Range(1, 1000));
    br->add_option("--bits", bits, "Spawned simulator ADC bits")->check(CLI::Range(8, 16));
    br->add_option("--channels", channels, "Spawned simulator ADC channels")->check(CLI::Range(1, 255));
    br->add_option("--shape", up_shape, "Shape the upstream link, e.g. delay=5ms,bw=8KiB");
    br->add_option("--seed", seed, "Seed for simulated IMU noise");
    br->callback([&] {
        bridge::BridgeOptions o;
        o.server = Endpoint::parse(server);
        if (device_ep != "spawn-sim") o.device = Endpoint::parse(device_ep);
        if (!record.empty()) o.record_dir = record;
        o.poll_period = std::chrono::milliseconds(poll_ms);
        if (!bplant.empty()) o.plant = plant_of(bplant);
        o.sim_config.sample_rate_hz = static_cast<std::uint16_t>(rate);
        o.sim_config.resolution_bits = static_cast<std::uint8_t>(bits);
        o.sim_config.channels = static_cast<std::uint8_t>(channels);
        if (!up_shape.empty()) o.upstream_shaping = transport::parse_shaping(up_shape);
        o.seed = seed;
        rc = cmd_bridge(o);
    });

    // station
    std::string ui, script;
    double tel_rate = 20.0;
    auto* st = app.add_subcommand("station", "Run the control station");
    st->add_option("--listen", listen, "Control endpoint for the bridge")->required();
    st->add_option("--ui", ui, "Endpoint for JSON UI sessions");
    st->add_option("--script", script, "JSON-lines command script, replayed after the handshake");
    st->add_option("--telemetry-hz", tel_rate, "Telemetry rate per UI session")->check(CLI::Range(0.1, 20.0));
    st->callback([&] {
        station::StationOptions o;
        o.control = Endpoint::parse(listen);
        if (!ui.empty()) o.ui = Endpoint::parse(ui);
        o.telemetry_rate_hz = tel_rate;
        rc = cmd_station(o, script);
    });

    // bench
    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Latency and throughput benchmark");
    bench->add_option("--connect", ba.connect, "Endpoint of a bench responder");
    bench->add_option("--serve", ba.serve, "Run a bench responder on this endpoint");
    bench->add_flag("--simulate", ba.simulate, "Run on a virtual clock over a simulated channel");
    bench->add_option("--shape", ba.shapes, "Channel shaping, e.g. delay=5ms,bw=8KiB/s,jitter=1ms");
    bench->add_option("--sizes", ba.sizes, "Packet sizes in bytes")->delimiter(',');
    bench->add_flag("--chunked", ba.chunked, "Send each packet as 64-byte frames");
    bench->add_flag("--no-latency", ba.no_latency, "Skip the latency test");
    bench->add_option("--rounds", ba.rounds, "Latency rounds")->check(CLI::PositiveNumber);
    bench->add_option("--probes", ba.probes, "Probes per latency round")->check(CLI::PositiveNumber);
    bench->add_option("--packets", ba.packets, "Packets per throughput size")->check(CLI::PositiveNumber);
    bench->add_option("--csv", ba.csv, "Write results as CSV");
    bench->callback([&] { rc = cmd_bench(ba); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
