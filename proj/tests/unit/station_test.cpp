#include <gtest/gtest.h>

#include <sstream>

#include "roboplat/bridge/bridge.hpp"
#include "roboplat/protocol/codec.hpp"
#include "roboplat/protocol/handshake.hpp"
#include "roboplat/station/station.hpp"
#include "roboplat/station/ui_json.hpp"

using namespace roboplat::station;
using namespace roboplat::protocol;
using roboplat::transport::ConnectionPtr;
using roboplat::transport::Endpoint;
using roboplat::transport::FramedLink;
using roboplat::transport::SimLoop;
using namespace std::chrono_literals;

namespace {

enum class Answer { Correct, Echo, Truncated, Empty, Silent };

// Control client standing in for a bridge.
struct FakeClient {
    std::shared_ptr<roboplat::transport::Connection> conn;
    std::unique_ptr<FramedLink> link;
    std::vector<Message> got;
    bool closed{false};

    FakeClient(SimLoop& loop, Answer mode) {
        conn = roboplat::transport::connect(loop, Endpoint::pipe("ctl"));
        link = std::make_unique<FramedLink>(
            conn,
            [this, mode](const Message& m) {
                got.push_back(m);
                if (const auto* r = std::get_if<TestRequest>(&m)) {
                    Bytes a = handshake_answer(r->challenge);
                    if (mode == Answer::Echo) a = r->challenge;
                    if (mode == Answer::Truncated) a.pop_back();
                    if (mode == Answer::Empty) a.clear();
                    if (mode != Answer::Silent) link->send(TestResponse{a});
                }
                if (const auto* p = std::get_if<LatencyProbe>(&m)) link->send(LatencyEcho{p->probe_id});
            },
            [this] { closed = true; });
    }
    std::size_t commands() const {
        return std::count_if(got.begin(), got.end(), [](const Message& m) {
            return std::holds_alternative<CmdDigital>(m) || std::holds_alternative<CmdPwm>(m);
        });
    }
};

// Line-oriented UI session.
struct UiClient {
    SimLoop& loop;
    ConnectionPtr conn;
    std::string buf;
    std::vector<std::pair<Nanos, std::string>> lines;

    explicit UiClient(SimLoop& l) : loop(l) {
        conn = roboplat::transport::connect(loop, Endpoint::pipe("ui"));
        conn->set_data_handler([this](std::span<const std::uint8_t> b) {
            buf.append(reinterpret_cast<const char*>(b.data()), b.size());
            for (std::size_t nl; (nl = buf.find('\n')) != std::string::npos;) {
                lines.emplace_back(loop.now(), buf.substr(0, nl));
                buf.erase(0, nl + 1);
            }
        });
    }
    void send(const std::string& line) {
        const std::string s = line + "\n";
        conn->send(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    }
    std::vector<Json> of_type(const std::string& type) const {
        std::vector<Json> out;
        for (const auto& [t, l] : lines) {
            auto j = Json::parse(l);
            if (j["type"] == type) out.push_back(j);
        }
        return out;
    }
};

StationOptions options() {
    StationOptions o;
    o.control = Endpoint::pipe("ctl");
    o.ui = Endpoint::pipe("ui");
    o.seed = 11;
    return o;
}

}  // namespace

// ------------------------------------------------------------- handshake

TEST(StationHandshake, ReversedAnswerVerifiesAndRequestsConfig) {
    SimLoop loop;
    Station st(loop, options());
    EXPECT_EQ(st.phase(), Phase::Listening);
    FakeClient c(loop, Answer::Correct);
    loop.run_for(1ms);
    EXPECT_EQ(st.phase(), Phase::Ready);
    ASSERT_EQ(c.got.size(), 2u);
    const auto& req = std::get<TestRequest>(c.got[0]);
    EXPECT_EQ(req.challenge.size(), kChallengeSize);
    EXPECT_EQ(c.got[1], Message(ConfigRequest{}));
    EXPECT_EQ(st.counters().handshakes_ok, 1u);
}

TEST(StationHandshake, ChallengesDifferPerConnection) {
    SimLoop loop;
    Station st(loop, options());
    Bytes first;
    {
        FakeClient c(loop, Answer::Correct);
        loop.run_for(1ms);
        first = std::get<TestRequest>(c.got[0]).challenge;
        c.link->close();
        loop.run_for(1ms);
    }
    EXPECT_EQ(st.phase(), Phase::Listening);
    FakeClient c(loop, Answer::Correct);
    loop.run_for(1ms);
    EXPECT_EQ(st.phase(), Phase::Ready);
    EXPECT_NE(std::get<TestRequest>(c.got[0]).challenge, first);
}

class BadAnswer : public ::testing::TestWithParam<Answer> {};

TEST_P(BadAnswer, DroppedAndNoCommandPasses) {
    SimLoop loop;
    auto opts = options();
    opts.handshake_timeout = 100ms;
    Station st(loop, opts);
    FakeClient c(loop, GetParam());
    // Commands injected while the handshake is pending or failed must never hit the wire.
    std::vector<SubmitStatus> statuses;
    for (int i = 0; i < 20; ++i) {
        loop.run_for(10ms);
        statuses.push_back(st.submit_command(CmdDigital{0, 1}));
        statuses.push_back(st.submit_command(CmdPwm{{100, 100, 100, 100}}));
    }
    EXPECT_TRUE(c.closed);
    EXPECT_EQ(st.phase(), Phase::Listening);
    EXPECT_EQ(c.commands(), 0u);
    EXPECT_TRUE(st.command_log().empty());
    EXPECT_EQ(st.counters().handshake_failures, 1u);
    for (auto s : statuses) EXPECT_NE(s, SubmitStatus::Accepted);
    EXPECT_EQ(statuses.back(), SubmitStatus::NotConnected);
    EXPECT_NE(std::find_if(st.events().begin(), st.events().end(),
                           [](const StationEvent& e) { return e.text.rfind("HandshakeFailed", 0) == 0; }),
              st.events().end());
}

INSTANTIATE_TEST_SUITE_P(Answers, BadAnswer,
                         ::testing::Values(Answer::Echo, Answer::Truncated, Answer::Empty, Answer::Silent));

TEST(StationHandshake, SecondClientGetsBusy) {
    SimLoop loop;
    Station st(loop, options());
    FakeClient a(loop, Answer::Correct);
    loop.run_for(1ms);
    FakeClient b(loop, Answer::Correct);
    loop.run_for(1ms);
    EXPECT_TRUE(b.closed);
    ASSERT_EQ(b.got.size(), 1u);
    EXPECT_EQ(b.got[0], Message(Busy{}));
    EXPECT_FALSE(a.closed);
    EXPECT_EQ(st.clients_refused(), 1u);
    EXPECT_EQ(st.phase(), Phase::Ready);
}

// ---------------------------------------------------------------- commands

TEST(StationCommands, SubmitResults) {
    SimLoop loop;
    auto opts = options();
    Station st(loop, opts);
    EXPECT_EQ(st.submit_command(CmdDigital{0, 1}), SubmitStatus::NotConnected);
    FakeClient c(loop, Answer::Silent);
    loop.run_for(1ms);
    EXPECT_EQ(st.submit_command(CmdDigital{0, 1}), SubmitStatus::NotVerified);
    EXPECT_THROW(st.submit_command(AdcRequest{}), std::invalid_argument);

    c.link->close();
    loop.run_for(1ms);
    FakeClient good(loop, Answer::Correct);
    loop.run_for(1ms);
    EXPECT_EQ(st.submit_command(CmdDigital{0, 1}), SubmitStatus::Accepted);
    EXPECT_EQ(st.submit_command(CmdPwm{{1000, 1500, 0, 0}}), SubmitStatus::BadValue);
    EXPECT_EQ(st.submit_command(CmdPwm{{1000, 1000, 0, 0}}), SubmitStatus::Accepted);
    loop.run_for(1ms);
    EXPECT_EQ(good.commands(), 2u);
    EXPECT_EQ(st.command_log().size(), 2u);
}

TEST(StationCommands, LogIsBoundedRing) {
    SimLoop loop;
    Station st(loop, options());
    FakeClient c(loop, Answer::Correct);
    loop.run_for(1ms);
    for (std::uint16_t i = 0; i < 1500; ++i)
        ASSERT_EQ(st.submit_command(CmdPwm{{static_cast<std::uint16_t>(i % 1001), 0, 0, 0}}), SubmitStatus::Accepted);
    ASSERT_EQ(st.command_log().size(), 1024u);
    EXPECT_EQ(std::get<CmdPwm>(st.command_log().front().command).strengths[0], 476);
    EXPECT_EQ(std::get<CmdPwm>(st.command_log().back().command).strengths[0], 1499 % 1001);
    loop.run_for(1ms);
    EXPECT_EQ(c.commands(), 1500u);
}

TEST(StationCommands, WireOrderEqualsSubmissionOrder) {
    SimLoop loop;
    Station st(loop, options());
    FakeClient c(loop, Answer::Correct);
    UiClient ui1(loop), ui2(loop);
    loop.run_for(1ms);
    std::vector<Message> expect;
    for (int i = 0; i < 30; ++i) {
        const std::uint8_t v = i % 2;
        if (i % 3 == 0) {
            ui1.send(command_json(CmdDigital{0, v}));
            expect.push_back(CmdDigital{0, v});
        } else if (i % 3 == 1) {
            ui2.send(command_json(CmdDigital{1, v}));
            expect.push_back(CmdDigital{1, v});
        } else {
            st.submit_command(CmdPwm{{static_cast<std::uint16_t>(i), 0, 0, 0}});
            expect.push_back(CmdPwm{{static_cast<std::uint16_t>(i), 0, 0, 0}});
        }
        loop.run_for(1ms);
    }
    std::vector<Message> wire;
    for (const auto& m : c.got)
        if (std::holds_alternative<CmdDigital>(m) || std::holds_alternative<CmdPwm>(m)) wire.push_back(m);
    EXPECT_EQ(wire, expect);
    ASSERT_EQ(st.command_log().size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(st.command_log()[i].command, expect[i]);
}

// ---------------------------------------------------------------- scripts

TEST(StationScript, FiveCommandsLoggedInOrder) {
    std::istringstream in(R"(# drive
{"t_ms":0,"type":"digital","line":0,"value":1}
{"t_ms":0,"type":"digital","line":1,"value":1}

{"t_ms":100,"type":"pwm","values":[1,2,3,4]}
{"t_ms":150.5,"type":"digital","line":1,"value":0}
{"t_ms":200,"type":"digital","line":0,"value":0}
)");
    auto steps = parse_script(in);
    ASSERT_EQ(steps.size(), 5u);
    EXPECT_EQ(steps[3].at, Nanos(150'500'000));

    SimLoop loop;
    Station st(loop, options());
    ScriptRunner runner(loop, st, steps);
    loop.run_for(50ms);
    EXPECT_FALSE(runner.started());
    FakeClient c(loop, Answer::Correct);
    loop.run_for(1s);
    EXPECT_TRUE(runner.done());
    ASSERT_EQ(st.command_log().size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(st.command_log()[i].command, *steps[i].command);
    EXPECT_EQ(st.command_log()[2].at - st.command_log()[0].at, Nanos(100ms));
    EXPECT_EQ(runner.results(), std::vector<SubmitStatus>(5, SubmitStatus::Accepted));
}

TEST(StationScript, EndStepStops) {
    std::istringstream in(R"({"t_ms":0,"type":"digital","line":0,"value":1}
{"t_ms":10,"type":"end"}
{"t_ms":20,"type":"digital","line":0,"value":0}
)");
    SimLoop loop;
    Station st(loop, options());
    bool ended = false;
    ScriptRunner runner(loop, st, parse_script(in), [&] {
        ended = true;
        st.stop();
    });
    FakeClient c(loop, Answer::Correct);
    loop.run_for(100ms);
    EXPECT_TRUE(ended);
    EXPECT_TRUE(c.closed);
    EXPECT_EQ(st.command_log().size(), 1u);
    EXPECT_EQ(runner.results().size(), 1u);
}

TEST(StationScript, Rejects) {
    const auto bad = [](const std::string& text) {
        std::istringstream in(text);
        EXPECT_THROW(parse_script(in), ScriptError) << text;
    };
    bad("{\"type\":\"digital\",\"line\":0,\"value\":1}");
    bad("{\"t_ms\":-1,\"type\":\"digital\",\"line\":0,\"value\":1}");
    bad("{\"t_ms\":5,\"type\":\"end\"}\n{\"t_ms\":4,\"type\":\"end\"}");
    bad("{\"t_ms\":0,\"type\":\"latency_test\"}");
    bad("{\"t_ms\":0,\"type\":\"digital\",\"line\":0,\"value\":3}");
    bad("not json");
    EXPECT_THROW(load_script("/nonexistent/script.jsonl"), ScriptError);
}

// ---------------------------------------------------------------- UI JSON

TEST(UiJson, ExactShapes) {
    EXPECT_EQ(status_json(true, false), R"({"type":"status","connected":true,"verified":false})");
    Telemetry t;
    t.t_ns = 1500000000;
    t.car_pos_m = 0.25;
    t.pwm = {1, 2, 3, 4};
    t.adc = {{0, 512}, {1, 7}};
    t.roll_rad = 0.5;
    t.pitch_rad = -0.125;
    EXPECT_EQ(telemetry_json(t),
              R"({"type":"telemetry","t_ns":1500000000,"car_pos_m":0.25,"pwm":[1,2,3,4],)"
              R"("adc":[{"ch":0,"v":512},{"ch":1,"v":7}],"attitude":[0.5,-0.125]})");
    EXPECT_EQ(command_json(CmdDigital{1, 1}), R"({"type":"digital","line":1,"value":1})");
    EXPECT_EQ(command_json(CmdPwm{{500, 500, 500, 500}}), R"({"type":"pwm","values":[500,500,500,500]})");
}

TEST(UiJson, ParseRoundTripAndErrors) {
    for (const Message& m : {Message(CmdDigital{0, 1}), Message(CmdDigital{1, 0}), Message(CmdPwm{{0, 1000, 5, 6}})}) {
        auto r = parse_ui_request(command_json(m));
        EXPECT_EQ(std::get<UiCommand>(r).command, m);
    }
    EXPECT_EQ(std::get<UiLatencyTest>(parse_ui_request(R"({"type":"latency_test","probes":7})")).probes, 7u);
    EXPECT_TRUE(std::holds_alternative<UiStatusQuery>(parse_ui_request(R"({"type":"status"})")));
    for (const char* bad : {"{", "[]", R"({"type":"warp"})", R"({"type":"digital","line":0})",
                            R"({"type":"digital","line":0,"value":2})", R"({"type":"pwm","values":[1,2,3]})",
                            R"({"type":"pwm","values":[1,2,3,"x"]})", R"({"type":"latency_test","probes":0})"})
        EXPECT_THROW(parse_ui_request(bad), UiError) << bad;
}

TEST(UiGateway, StatusOnConnectAndOnVerify) {
    SimLoop loop;
    Station st(loop, options());
    UiClient ui(loop);
    loop.run_for(1ms);
    FakeClient c(loop, Answer::Correct);
    loop.run_for(1ms);
    const auto statuses = ui.of_type("status");
    ASSERT_GE(statuses.size(), 2u);
    EXPECT_EQ(statuses.front()["verified"], false);
    EXPECT_EQ(statuses.back()["connected"], true);
    EXPECT_EQ(statuses.back()["verified"], true);
}

TEST(UiGateway, DigitalReachesWire) {
    SimLoop loop;
    Station st(loop, options());
    FakeClient c(loop, Answer::Correct);
    UiClient ui(loop);
    loop.run_for(1ms);
    ui.send(R"({"type":"digital","line":0,"value":1})");
    loop.run_for(1ms);
    ASSERT_EQ(c.commands(), 1u);
    EXPECT_EQ(c.got.back(), Message(CmdDigital{0, 1}));
    EXPECT_EQ(ui.of_type("ack").size(), 1u);
}

TEST(UiGateway, RejectionsAreReportedToSenderOnly) {
    SimLoop loop;
    Station st(loop, options());
    UiClient a(loop), b(loop);
    loop.run_for(1ms);
    a.send(R"({"type":"digital","line":0,"value":1})");
    a.send("{broken");
    a.send(R"({"type":"status"})");
    loop.run_for(1ms);
    const auto errors = a.of_type("error");
    ASSERT_EQ(errors.size(), 2u);
    EXPECT_EQ(errors[0]["reason"], "NotConnected");
    EXPECT_EQ(errors[1]["reason"], "malformed JSON");
    EXPECT_EQ(a.of_type("status").size(), 2u);  // session still answers
    EXPECT_TRUE(b.of_type("error").empty());
    EXPECT_EQ(st.ui_session_count(), 2u);
}

TEST(UiGateway, TelemetryRateLimitedPerSession) {
    SimLoop loop;
    Station st(loop, options());
    FakeClient c(loop, Answer::Correct);
    UiClient a(loop), b(loop);
    loop.run_for(1ms);
    // 200 Hz feed for 2 s.
    for (int i = 0; i < 400; ++i) {
        Telemetry t;
        t.t_ns = static_cast<std::uint64_t>(i) * 5'000'000;
        t.car_pos_m = i;
        c.link->send(t);
        loop.run_for(5ms);
    }
    loop.run_for(100ms);
    EXPECT_EQ(st.counters().telemetry_received, 400u);
    for (UiClient* ui : {&a, &b}) {
        std::vector<Nanos> times;
        for (const auto& [t, l] : ui->lines)
            if (Json::parse(l)["type"] == "telemetry") times.push_back(t);
        ASSERT_GE(times.size(), 38u);
        EXPECT_LE(times.size(), 41u);
        for (std::size_t i = 1; i < times.size(); ++i) EXPECT_GE(times[i] - times[i - 1], Nanos(50ms));
        // The trailing snapshot is delivered, not lost.
        EXPECT_EQ(ui->of_type("telemetry").back()["car_pos_m"], 399.0);
    }
}

TEST(UiGateway, LatencyTestOverControlLink) {
    SimLoop loop;
    Station st(loop, options());
    UiClient ui(loop);
    loop.run_for(1ms);
    ui.send(R"({"type":"latency_test","probes":5})");
    loop.run_for(1ms);
    ASSERT_EQ(ui.of_type("error").size(), 1u);
    EXPECT_EQ(ui.of_type("error")[0]["reason"], "NotVerified");
    FakeClient c(loop, Answer::Correct);
    loop.run_for(1ms);
    ui.send(R"({"type":"latency_test","probes":5})");
    loop.run_for(100ms);
    const auto res = ui.of_type("bench_result");
    ASSERT_EQ(res.size(), 1u);
    EXPECT_EQ(res[0]["received"], 5);
    EXPECT_EQ(res[0]["timeouts"], 0);
}

// ------------------------------------------------------- with a real bridge

TEST(StationWithBridge, ReadyAndTelemetryFlows) {
    SimLoop loop;
    Station st(loop, options());
    UiClient ui(loop);
    roboplat::bridge::BridgeOptions bo;
    bo.server = Endpoint::pipe("ctl");
    auto bridge = roboplat::bridge::BridgeProcess::launch(loop, bo);
    loop.run_for(500ms);
    EXPECT_EQ(st.phase(), Phase::Ready);
    EXPECT_TRUE(bridge->node().upstream_verified());
    ASSERT_TRUE(st.device_config());
    EXPECT_EQ(st.device_config()->sample_rate_hz, 100);
    EXPECT_GT(ui.of_type("telemetry").size(), 5u);

    EXPECT_EQ(st.submit_command(CmdDigital{0, 1}), SubmitStatus::Accepted);
    loop.run_for(10ms);
    EXPECT_TRUE(bridge->sim_device()->state().enable);
    st.stop();
    loop.run_for(10ms);
    EXPECT_EQ(bridge->node().exit(), roboplat::bridge::BridgeExit::LinkLost);
    EXPECT_FALSE(bridge->sim_device()->state().enable);
}
