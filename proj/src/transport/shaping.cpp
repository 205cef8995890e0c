#include "roboplat/transport/shaping.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <random>
#include <stdexcept>

namespace roboplat::transport {

void ShapingParams::validate() const {
    if (one_way_delay < Nanos::zero()) throw std::invalid_argument("negative delay");
    if (jitter_std < Nanos::zero()) throw std::invalid_argument("negative jitter");
    if (bandwidth_Bps && !(*bandwidth_Bps > 0.0 && std::isfinite(*bandwidth_Bps)))
        throw std::invalid_argument("bandwidth must be positive");
}

Nanos serialization_time(std::size_t bytes, std::optional<double> bandwidth_Bps) {
    if (!bandwidth_Bps) return Nanos::zero();
    return Nanos(std::llround(static_cast<double>(bytes) * 1e9 / *bandwidth_Bps));
}

namespace {

double parse_number(std::string_view text, std::string_view what) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw std::invalid_argument("bad " + std::string(what) + ": '" + std::string(text) + "'");
    return v;
}

}  // namespace

Nanos parse_duration(std::string_view text) {
    static constexpr std::pair<std::string_view, double> kUnits[] = {
        {"ns", 1.0}, {"us", 1e3}, {"ms", 1e6}, {"s", 1e9}};
    for (const auto& [suffix, scale] : kUnits) {
        if (text.size() > suffix.size() && text.ends_with(suffix)) {
            const auto head = text.substr(0, text.size() - suffix.size());
            // "ms" also ends with "s"; make sure the number part is numeric.
            if (!head.empty() && (std::isdigit(static_cast<unsigned char>(head.back())) || head.back() == '.'))
                return Nanos(std::llround(parse_number(head, "duration") * scale));
        }
    }
    throw std::invalid_argument("bad duration: '" + std::string(text) + "'");
}

ShapingParams parse_shaping(std::string_view text) {
    ShapingParams p;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const auto item = text.substr(0, comma);
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument("expected key=value: '" + std::string(item) + "'");
        const auto key = item.substr(0, eq);
        auto value = item.substr(eq + 1);
        if (key == "delay") {
            p.one_way_delay = parse_duration(value);
        } else if (key == "jitter") {
            p.jitter_std = parse_duration(value);
        } else if (key == "seed") {
            p.seed = static_cast<std::uint64_t>(parse_number(value, "seed"));
        } else if (key == "bw") {
            if (value == "inf") {
                p.bandwidth_Bps.reset();
                continue;
            }
            if (value.ends_with("/s")) value.remove_suffix(2);
            double scale = 1.0;
            if (value.ends_with("KiB")) {
                scale = 1024.0;
                value.remove_suffix(3);
            } else if (value.ends_with("MiB")) {
                scale = 1024.0 * 1024.0;
                value.remove_suffix(3);
            } else if (value.ends_with("B")) {
                value.remove_suffix(1);
            }
            p.bandwidth_Bps = parse_number(value, "bandwidth") * scale;
        } else {
            throw std::invalid_argument("unknown shaping key: '" + std::string(key) + "'");
        }
    }
    p.validate();
    return p;
}

namespace {

class ShapedConnection final : public Connection {
public:
    ShapedConnection(ConnectionPtr inner, const ShapingParams& p)
        : Connection(inner->loop(), inner->label() + "+shaped"), inner_(std::move(inner)), params_(p), rng_(p.seed) {}

    void start() {
        std::weak_ptr<ShapedConnection> weak = std::static_pointer_cast<ShapedConnection>(shared_from_this());
        inner_->set_data_handler([weak](std::span<const std::uint8_t> bytes) {
            if (auto self = weak.lock()) self->on_inbound(bytes);
        });
        inner_close_id_ = inner_->add_close_handler([weak] {
            if (auto self = weak.lock()) self->on_inner_closed();
        });
    }

    ~ShapedConnection() override {
        inner_->remove_close_handler(inner_close_id_);
        inner_->set_data_handler(nullptr);
        inner_->close();
    }

    void send(std::span<const std::uint8_t> bytes) override {
        if (!is_open() || bytes.empty()) return;
        count_sent(bytes.size());
        const Nanos now = loop_.now();
        const Nanos start = std::max(now, tx_free_);
        tx_free_ = start + serialization_time(bytes.size(), params_.bandwidth_Bps);
        const Nanos arrive = std::max(tx_free_ + sample_delay(), tx_last_arrival_);
        tx_last_arrival_ = arrive;
        loop_.call_at(arrive, [inner = inner_, data = Bytes(bytes.begin(), bytes.end())] { inner->send(data); });
    }

    void close() override {
        if (!is_open()) return;
        mark_closed();
        const Nanos at = std::max(loop_.now(), tx_last_arrival_);
        loop_.call_at(at, [inner = inner_] { inner->close(); });
    }

private:
    Nanos sample_delay() {
        if (params_.jitter_std == Nanos::zero()) return params_.one_way_delay;
        std::normal_distribution<double> dist(static_cast<double>(params_.one_way_delay.count()),
                                              static_cast<double>(params_.jitter_std.count()));
        return Nanos(std::max<long long>(0, std::llround(dist(rng_))));
    }

    void on_inbound(std::span<const std::uint8_t> bytes) {
        const Nanos arrive = std::max(loop_.now() + sample_delay(), rx_last_arrival_);
        rx_last_arrival_ = arrive;
        std::weak_ptr<Connection> weak = weak_from_this();
        loop_.call_at(arrive, [weak, data = Bytes(bytes.begin(), bytes.end())] {
            if (auto self = weak.lock()) static_cast<ShapedConnection*>(self.get())->deliver(data);
        });
    }

    void on_inner_closed() {
        const Nanos at = std::max(loop_.now() + params_.one_way_delay, rx_last_arrival_);
        std::weak_ptr<Connection> weak = weak_from_this();
        loop_.call_at(at, [weak] {
            if (auto self = weak.lock()) static_cast<ShapedConnection*>(self.get())->mark_closed();
        });
    }

    ConnectionPtr inner_;
    ShapingParams params_;
    std::mt19937_64 rng_;
    Nanos tx_free_{0};
    Nanos tx_last_arrival_{0};
    Nanos rx_last_arrival_{0};
    HandlerId inner_close_id_{0};
};

}  // namespace

ConnectionPtr shape(ConnectionPtr inner, const ShapingParams& params) {
    params.validate();
    auto c = std::make_shared<ShapedConnection>(std::move(inner), params);
    c->start();
    return c;
}

}  // namespace roboplat::transport
