#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <random>

#include "roboplat/transport/framed_link.hpp"
#include "roboplat/transport/net.hpp"
#include "roboplat/transport/shaping.hpp"

using namespace roboplat::transport;
using roboplat::protocol::Message;

namespace {

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
}

// Echoes every byte back on the same connection.
void make_echo(const ConnectionPtr& c) {
    std::weak_ptr<Connection> weak = c;
    c->set_data_handler([weak](std::span<const std::uint8_t> bytes) {
        if (auto s = weak.lock()) s->send(bytes);
    });
}

struct Collector {
    Bytes data;
    bool closed{false};
    void attach(const ConnectionPtr& c) {
        c->set_data_handler([this](std::span<const std::uint8_t> b) { data.insert(data.end(), b.begin(), b.end()); });
        c->add_close_handler([this] { closed = true; });
    }
};

std::uint16_t unused_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
    socklen_t len = sizeof a;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
    ::close(fd);
    return ntohs(a.sin_port);
}

}  // namespace

TEST(SimLoop, OrdersByTimeThenInsertion) {
    SimLoop loop;
    std::vector<int> order;
    loop.call_at(Nanos(20), [&] { order.push_back(3); });
    loop.call_at(Nanos(10), [&] { order.push_back(1); });
    loop.call_at(Nanos(10), [&] { order.push_back(2); });
    const auto cancelled = loop.call_at(Nanos(15), [&] { order.push_back(99); });
    loop.cancel(cancelled);
    loop.run();
    EXPECT_EQ(order, (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(loop.now(), Nanos(20));
}

TEST(SimLoop, RunUntilAdvancesClock) {
    SimLoop loop;
    int fired = 0;
    loop.call_after(Nanos(5ms), [&] { ++fired; });
    loop.run_until(Nanos(4ms));
    EXPECT_EQ(fired, 0);
    EXPECT_EQ(loop.now(), Nanos(4ms));
    loop.run_for(Nanos(1ms));
    EXPECT_EQ(fired, 1);
}

TEST(Endpoint, Parse) {
    EXPECT_EQ(Endpoint::parse("127.0.0.1:7000"), Endpoint::tcp("127.0.0.1", 7000));
    EXPECT_EQ(Endpoint::parse("tcp://localhost:1"), Endpoint::tcp("localhost", 1));
    EXPECT_EQ(Endpoint::parse(":65535"), Endpoint::tcp("", 65535));
    EXPECT_EQ(Endpoint::parse("pipe:usb"), Endpoint::pipe("usb"));
    for (const char* bad : {"host", "host:0", "host:65536", "host:12x", "pipe:", "h:"}) {
        try {
            Endpoint::parse(bad);
            ADD_FAILURE() << bad;
        } catch (const TransportError& e) {
            EXPECT_EQ(e.code(), TransportErrorCode::BadEndpoint);
        }
    }
}

TEST(Pipe, EchoReturnsSentBytes) {
    SimLoop loop;
    std::mt19937_64 rng(5);
    auto [a, b] = make_pipe(loop);
    make_echo(b);
    Collector col;
    col.attach(a);
    Bytes sent;
    for (int i = 0; i < 50; ++i) {
        const auto chunk = random_bytes(rng, rng() % 500 + 1);
        sent.insert(sent.end(), chunk.begin(), chunk.end());
        a->send(chunk);
    }
    loop.run();
    EXPECT_EQ(col.data, sent);
}

TEST(Pipe, CloseReachesPeerAfterData) {
    SimLoop loop;
    auto [a, b] = make_pipe(loop);
    Collector col;
    col.attach(b);
    const Bytes msg{1, 2, 3};
    a->send(msg);
    a->close();
    EXPECT_FALSE(a->is_open());
    loop.run();
    EXPECT_EQ(col.data, msg);
    EXPECT_TRUE(col.closed);
}

TEST(PipeListener, SecondClientRefusedWithBusyNotice) {
    SimLoop loop;
    std::vector<ConnectionPtr> accepted;
    auto listener = listen(loop, Endpoint::pipe("ctl"), [&](ConnectionPtr c) { accepted.push_back(c); },
                           ListenOptions{1, Bytes{0xBB}});
    auto first = connect(loop, Endpoint::pipe("ctl"));
    loop.run();
    ASSERT_EQ(accepted.size(), 1u);

    auto second = connect(loop, Endpoint::pipe("ctl"));
    Collector col;
    col.attach(second);
    loop.run();
    EXPECT_EQ(accepted.size(), 1u);
    EXPECT_EQ(col.data, Bytes{0xBB});
    EXPECT_TRUE(col.closed);
    EXPECT_EQ(listener->refused(), 1u);
}

TEST(PipeListener, ReconnectAfterDisconnectAccepted) {
    SimLoop loop;
    std::vector<ConnectionPtr> accepted;
    auto listener = listen(loop, Endpoint::pipe("ctl"), [&](ConnectionPtr c) { accepted.push_back(c); },
                           ListenOptions{1, {}});
    auto first = connect(loop, Endpoint::pipe("ctl"));
    loop.run();
    first->close();
    loop.run();
    EXPECT_EQ(listener->active(), 0u);
    auto second = connect(loop, Endpoint::pipe("ctl"));
    loop.run();
    EXPECT_EQ(accepted.size(), 2u);
    EXPECT_EQ(listener->refused(), 0u);
}

TEST(PipeListener, ChannelUsableImmediately) {
    SimLoop loop;
    Collector col;
    ConnectionPtr server;
    auto listener = listen(loop, Endpoint::pipe("x"), [&](ConnectionPtr c) {
        server = c;
        col.attach(c);
    });
    auto client = connect(loop, Endpoint::pipe("x"));
    client->send(Bytes{9, 8, 7});
    loop.run();
    EXPECT_EQ(col.data, (Bytes{9, 8, 7}));
}

TEST(PipeListener, NoListenerRefused) {
    SimLoop loop;
    try {
        connect(loop, Endpoint::pipe("nobody"));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.code(), TransportErrorCode::ConnectRefused);
    }
}

namespace {

// RTT of one echo of `size` bytes through a client shaped with `p`.
Nanos shaped_rtt(const ShapingParams& p, std::size_t size) {
    SimLoop loop;
    auto [a, b] = make_pipe(loop);
    make_echo(b);
    auto shaped = shape(a, p);
    std::size_t got = 0;
    Nanos done{-1};
    shaped->set_data_handler([&](std::span<const std::uint8_t> bytes) {
        got += bytes.size();
        if (got == size) done = loop.now();
    });
    const Nanos start = loop.now();
    shaped->send(Bytes(size, 0x42));
    loop.run();
    return done - start;
}

}  // namespace

TEST(Shaping, DelayOnlyEchoRtt) {
    ShapingParams p;
    p.one_way_delay = 5ms;
    const auto rtt = shaped_rtt(p, 64);
    const double ms = std::chrono::duration<double, std::milli>(rtt).count();
    EXPECT_NEAR(ms, 10.0, 1.0);
}

TEST(Shaping, BandwidthOnlyTransfer) {
    SimLoop loop;
    auto [a, b] = make_pipe(loop);
    ShapingParams p;
    p.bandwidth_Bps = 1000.0;
    auto shaped = shape(a, p);
    std::size_t got = 0;
    Nanos done{-1};
    b->set_data_handler([&](std::span<const std::uint8_t> bytes) {
        got += bytes.size();
        if (got == 1000) done = loop.now();
    });
    for (int i = 0; i < 10; ++i) shaped->send(Bytes(100, 1));
    loop.run();
    EXPECT_NEAR(std::chrono::duration<double>(done).count(), 1.0, 1e-9);
}

TEST(Shaping, RttMatchesDelayPlusSerialization) {
    for (double bw : {1000.0, 8192.0, 65536.0}) {
        for (std::size_t size : {16u, 64u, 512u, 4096u}) {
            ShapingParams p;
            p.one_way_delay = 5ms;
            p.bandwidth_Bps = bw;
            const double expect = 2 * 5e-3 + static_cast<double>(size) / bw;
            const double got = std::chrono::duration<double>(shaped_rtt(p, size)).count();
            EXPECT_NEAR(got, expect, 0.05 * expect) << "bw " << bw << " size " << size;
        }
    }
}

TEST(Shaping, JitterRunsAreReproducible) {
    const auto timings = [](std::uint64_t seed) {
        SimLoop loop;
        auto [a, b] = make_pipe(loop);
        make_echo(b);
        ShapingParams p;
        p.one_way_delay = 5ms;
        p.jitter_std = 1ms;
        p.seed = seed;
        auto s = shape(a, p);
        std::vector<Nanos> arrivals;
        s->set_data_handler([&](std::span<const std::uint8_t>) { arrivals.push_back(loop.now()); });
        for (int i = 0; i < 20; ++i) loop.call_at(Nanos(i * 1ms), [s] { s->send(Bytes{1}); });
        loop.run();
        return arrivals;
    };
    EXPECT_EQ(timings(7), timings(7));
    EXPECT_NE(timings(7), timings(8));
}

TEST(Shaping, JitterPreservesOrderAndContent) {
    SimLoop loop;
    auto [a, b] = make_pipe(loop);
    make_echo(b);
    ShapingParams p;
    p.one_way_delay = 2ms;
    p.jitter_std = 3ms;
    p.bandwidth_Bps = 1e6;
    auto s = shape(a, p);
    Collector col;
    col.attach(s);
    Bytes sent;
    for (std::uint32_t seq = 0; seq < 5000; ++seq) {
        const Bytes chunk{static_cast<std::uint8_t>(seq >> 24), static_cast<std::uint8_t>(seq >> 16),
                          static_cast<std::uint8_t>(seq >> 8), static_cast<std::uint8_t>(seq)};
        sent.insert(sent.end(), chunk.begin(), chunk.end());
        loop.call_at(Nanos(seq * 100us), [s, chunk] { s->send(chunk); });
    }
    loop.run();
    EXPECT_EQ(col.data, sent);
}

TEST(Shaping, RejectsInvalidParams) {
    SimLoop loop;
    auto [a, b] = make_pipe(loop);
    ShapingParams p;
    p.one_way_delay = Nanos(-1);
    EXPECT_THROW(shape(a, p), std::invalid_argument);
    p.one_way_delay = Nanos(0);
    p.bandwidth_Bps = 0.0;
    EXPECT_THROW(shape(a, p), std::invalid_argument);
}

TEST(FramedLink, MessagesCrossPipe) {
    SimLoop loop;
    auto [a, b] = make_pipe(loop);
    std::vector<Message> got;
    FramedLink la(a, [](const Message&) {});
    FramedLink lb(b, [&](const Message& m) { got.push_back(m); });
    la.send(roboplat::protocol::CmdDigital{0, 1});
    la.send(roboplat::protocol::LatencyProbe{77});
    loop.run();
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[1], Message(roboplat::protocol::LatencyProbe{77}));
}

TEST(FramedLink, HandlerMayDestroyLink) {
    SimLoop loop;
    auto [a, b] = make_pipe(loop);
    FramedLink la(a, [](const Message&) {});
    std::unique_ptr<FramedLink> lb;
    int seen = 0;
    lb = std::make_unique<FramedLink>(b, [&](const Message&) {
        ++seen;
        lb.reset();
    });
    la.send(roboplat::protocol::AdcRequest{});
    la.send(roboplat::protocol::AdcRequest{});
    loop.run();
    EXPECT_EQ(seen, 1);
}

TEST(Tcp, LoopbackEchoAndSoak) {
    PollLoop loop;
    std::vector<ConnectionPtr> server_side;
    auto listener = listen(loop, Endpoint::tcp("127.0.0.1", 0), [&](ConnectionPtr c) {
        make_echo(c);
        server_side.push_back(c);
    });
    auto client = connect(loop, listener->address());
    Collector col;
    col.attach(client);
    std::mt19937_64 rng(11);
    Bytes sent;
    for (int i = 0; i < 200; ++i) {
        const auto chunk = random_bytes(rng, rng() % 8000 + 1);
        sent.insert(sent.end(), chunk.begin(), chunk.end());
        client->send(chunk);
    }
    EXPECT_TRUE(loop.run_until_condition([&] { return col.data.size() >= sent.size(); }, loop.now() + Nanos(10s)));
    EXPECT_EQ(col.data, sent);
}

TEST(Tcp, UnusedPortRefused) {
    PollLoop loop;
    try {
        connect(loop, Endpoint::tcp("127.0.0.1", unused_port()));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.code(), TransportErrorCode::ConnectRefused);
    }
}

TEST(Tcp, SingleClientPolicyAndReconnect) {
    PollLoop loop;
    std::vector<ConnectionPtr> accepted;
    auto listener = listen(loop, Endpoint::tcp("127.0.0.1", 0),
                           [&](ConnectionPtr c) { accepted.push_back(c); }, ListenOptions{1, Bytes{0xBB}});
    auto first = connect(loop, listener->address());
    ASSERT_TRUE(loop.run_until_condition([&] { return accepted.size() == 1; }, loop.now() + Nanos(2s)));

    auto second = connect(loop, listener->address());
    Collector col;
    col.attach(second);
    ASSERT_TRUE(loop.run_until_condition([&] { return col.closed; }, loop.now() + Nanos(2s)));
    EXPECT_EQ(col.data, Bytes{0xBB});
    EXPECT_EQ(accepted.size(), 1u);

    first->close();
    ASSERT_TRUE(loop.run_until_condition([&] { return listener->active() == 0; }, loop.now() + Nanos(2s)));
    auto third = connect(loop, listener->address());
    ASSERT_TRUE(loop.run_until_condition([&] { return accepted.size() == 2; }, loop.now() + Nanos(2s)));
}

TEST(Tcp, SimLoopUnsupported) {
    SimLoop loop;
    EXPECT_THROW(connect(loop, Endpoint::tcp("127.0.0.1", 1)), TransportError);
}

TEST(Shaping, ParseSpec) {
    const auto p = parse_shaping("delay=5ms,bw=8KiB,jitter=250us,seed=9");
    EXPECT_EQ(p.one_way_delay, Nanos(5ms));
    EXPECT_EQ(p.jitter_std, Nanos(250us));
    EXPECT_EQ(p.bandwidth_Bps, 8192.0);
    EXPECT_EQ(p.seed, 9u);
    EXPECT_FALSE(parse_shaping("delay=1.5s,bw=inf").bandwidth_Bps.has_value());
    EXPECT_EQ(parse_shaping("delay=1.5s").one_way_delay, Nanos(1500ms));
    EXPECT_EQ(parse_shaping("bw=1000B/s").bandwidth_Bps, 1000.0);
    EXPECT_THROW(parse_shaping("delay=5"), std::invalid_argument);
    EXPECT_THROW(parse_shaping("bw=0"), std::invalid_argument);
    EXPECT_THROW(parse_shaping("speed=1"), std::invalid_argument);
}
