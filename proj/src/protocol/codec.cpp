#include "roboplat/protocol/codec.hpp"

#include <bit>
#include <cstring>

namespace roboplat::protocol {
namespace {

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
        out_.push_back(static_cast<std::uint8_t>(v));
    }
    void u32(std::uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void u64(std::uint64_t v) {
        for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    bool has(std::size_t n) const { return in_.size() - pos_ >= n; }
    std::size_t remaining() const { return in_.size() - pos_; }
    std::uint8_t u8() { return in_[pos_++]; }
    std::uint16_t u16() {
        const auto v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    Bytes rest() {
        Bytes b(in_.begin() + static_cast<std::ptrdiff_t>(pos_), in_.end());
        pos_ = in_.size();
        return b;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_{0};
};

void require(bool ok, const char* what) {
    if (!ok) throw ProtocolError(what);
}

void write_adc(Writer& w, const std::vector<AdcReading>& samples) {
    for (const auto& s : samples) {
        w.u8(s.channel);
        w.u16(s.reading);
    }
}

struct PayloadWriter {
    Writer& w;

    void operator()(const TestRequest& m) const {
        require(!m.challenge.empty() && m.challenge.size() <= kMaxChallenge, "challenge must be 1..64 bytes");
        w.bytes(m.challenge);
    }
    void operator()(const TestResponse& m) const {
        require(m.answer.size() <= kMaxChallenge, "answer longer than 64 bytes");
        w.bytes(m.answer);
    }
    void operator()(const Busy&) const {}
    void operator()(const CmdDigital& m) const {
        require(m.value <= 1, "digital value must be 0 or 1");
        w.u8(m.line);
        w.u8(m.value);
    }
    void operator()(const CmdPwm& m) const {
        for (auto s : m.strengths) {
            require(s <= kMaxPwm, "pwm strength above 1000");
            w.u16(s);
        }
    }
    void operator()(const AdcRequest&) const {}
    void operator()(const AdcReport& m) const { write_adc(w, m.samples); }
    void operator()(const ConfigRequest&) const {}
    void operator()(const ConfigResponse& m) const {
        w.u8(m.channels);
        w.u8(m.resolution_bits);
        w.u16(m.sample_rate_hz);
    }
    void operator()(const LatencyProbe& m) const { w.u64(m.probe_id); }
    void operator()(const LatencyEcho& m) const { w.u64(m.probe_id); }
    void operator()(const ThroughputData& m) const {
        w.u32(m.seq);
        w.bytes(m.pattern);
    }
    void operator()(const ThroughputAck& m) const { w.u64(m.bytes_ok); }
    void operator()(const Telemetry& m) const {
        require(m.adc.size() <= 255, "too many adc readings in telemetry");
        for (auto s : m.pwm) require(s <= kMaxPwm, "pwm strength above 1000");
        w.u64(m.t_ns);
        w.u8(static_cast<std::uint8_t>(m.plant));
        w.u8(m.enable ? 1 : 0);
        w.u8(m.forward ? 1 : 0);
        for (auto s : m.pwm) w.u16(s);
        w.f64(m.car_pos_m);
        w.f64(m.car_vel_mps);
        w.f64(m.roll_rad);
        w.f64(m.pitch_rad);
        w.u8(static_cast<std::uint8_t>(m.adc.size()));
        write_adc(w, m.adc);
    }
};

std::optional<Message> parse(MsgType type, Reader& r, DecodeIssue& issue) {
    const auto bad = [&issue]() -> std::optional<Message> {
        issue = DecodeIssue::BadValue;
        return std::nullopt;
    };
    const auto exact = [&r](std::size_t n) { return r.remaining() == n; };

    switch (type) {
        case MsgType::TestRequest: {
            if (r.remaining() == 0 || r.remaining() > kMaxChallenge) return bad();
            return TestRequest{r.rest()};
        }
        case MsgType::TestResponse: {
            if (r.remaining() > kMaxChallenge) return bad();
            return TestResponse{r.rest()};
        }
        case MsgType::Busy:
            if (!exact(0)) return bad();
            return Busy{};
        case MsgType::CmdDigital: {
            if (!exact(2)) return bad();
            CmdDigital m{r.u8(), r.u8()};
            if (m.value > 1) return bad();
            return m;
        }
        case MsgType::CmdPwm: {
            if (!exact(8)) return bad();
            CmdPwm m;
            for (auto& s : m.strengths) {
                s = r.u16();
                if (s > kMaxPwm) return bad();
            }
            return m;
        }
        case MsgType::AdcRequest:
            if (!exact(0)) return bad();
            return AdcRequest{};
        case MsgType::AdcReport: {
            if (r.remaining() % 3 != 0) return bad();
            AdcReport m;
            while (r.has(3)) m.samples.push_back({r.u8(), r.u16()});
            return m;
        }
        case MsgType::ConfigRequest:
            if (!exact(0)) return bad();
            return ConfigRequest{};
        case MsgType::ConfigResponse: {
            if (!exact(4)) return bad();
            ConfigResponse m{r.u8(), r.u8(), r.u16()};
            if (m.resolution_bits < 8 || m.resolution_bits > 16) return bad();
            if (m.sample_rate_hz < 1 || m.sample_rate_hz > 1000) return bad();
            return m;
        }
        case MsgType::LatencyProbe:
            if (!exact(8)) return bad();
            return LatencyProbe{r.u64()};
        case MsgType::LatencyEcho:
            if (!exact(8)) return bad();
            return LatencyEcho{r.u64()};
        case MsgType::ThroughputData: {
            if (!r.has(4)) return bad();
            ThroughputData m;
            m.seq = r.u32();
            m.pattern = r.rest();
            return m;
        }
        case MsgType::ThroughputAck:
            if (!exact(8)) return bad();
            return ThroughputAck{r.u64()};
        case MsgType::Telemetry: {
            if (!r.has(52)) return bad();
            Telemetry m;
            m.t_ns = r.u64();
            const auto plant = r.u8();
            const auto enable = r.u8();
            const auto forward = r.u8();
            if (plant > 1 || enable > 1 || forward > 1) return bad();
            m.plant = static_cast<PlantKind>(plant);
            m.enable = enable == 1;
            m.forward = forward == 1;
            for (auto& s : m.pwm) {
                s = r.u16();
                if (s > kMaxPwm) return bad();
            }
            m.car_pos_m = r.f64();
            m.car_vel_mps = r.f64();
            m.roll_rad = r.f64();
            m.pitch_rad = r.f64();
            const auto n = r.u8();
            if (!exact(static_cast<std::size_t>(n) * 3)) return bad();
            for (int i = 0; i < n; ++i) m.adc.push_back({r.u8(), r.u16()});
            return m;
        }
    }
    issue = DecodeIssue::UnknownType;
    return std::nullopt;
}

bool known_type(std::uint8_t t) {
    switch (static_cast<MsgType>(t)) {
        case MsgType::TestRequest:
        case MsgType::TestResponse:
        case MsgType::Busy:
        case MsgType::CmdDigital:
        case MsgType::CmdPwm:
        case MsgType::AdcRequest:
        case MsgType::AdcReport:
        case MsgType::ConfigRequest:
        case MsgType::ConfigResponse:
        case MsgType::LatencyProbe:
        case MsgType::LatencyEcho:
        case MsgType::ThroughputData:
        case MsgType::ThroughputAck:
        case MsgType::Telemetry: return true;
    }
    return false;
}

}  // namespace

MsgType type_of(const Message& m) {
    static constexpr MsgType kTypes[] = {
        MsgType::TestRequest,   MsgType::TestResponse,   MsgType::Busy,         MsgType::CmdDigital,
        MsgType::CmdPwm,        MsgType::AdcRequest,     MsgType::AdcReport,    MsgType::ConfigRequest,
        MsgType::ConfigResponse, MsgType::LatencyProbe,  MsgType::LatencyEcho,  MsgType::ThroughputData,
        MsgType::ThroughputAck, MsgType::Telemetry};
    return kTypes[m.index()];
}

const char* type_name(MsgType t) {
    switch (t) {
        case MsgType::TestRequest: return "TestRequest";
        case MsgType::TestResponse: return "TestResponse";
        case MsgType::Busy: return "Busy";
        case MsgType::CmdDigital: return "CmdDigital";
        case MsgType::CmdPwm: return "CmdPwm";
        case MsgType::AdcRequest: return "AdcRequest";
        case MsgType::AdcReport: return "AdcReport";
        case MsgType::ConfigRequest: return "ConfigRequest";
        case MsgType::ConfigResponse: return "ConfigResponse";
        case MsgType::LatencyProbe: return "LatencyProbe";
        case MsgType::LatencyEcho: return "LatencyEcho";
        case MsgType::ThroughputData: return "ThroughputData";
        case MsgType::ThroughputAck: return "ThroughputAck";
        case MsgType::Telemetry: return "Telemetry";
    }
    return "Unknown";
}

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data, std::uint16_t crc) {
    static const auto table = [] {
        std::array<std::uint16_t, 256> t{};
        for (int i = 0; i < 256; ++i) {
            auto c = static_cast<std::uint16_t>(i << 8);
            for (int b = 0; b < 8; ++b) c = (c & 0x8000) ? static_cast<std::uint16_t>((c << 1) ^ 0x1021) : static_cast<std::uint16_t>(c << 1);
            t[static_cast<std::size_t>(i)] = c;
        }
        return t;
    }();
    for (auto byte : data) {
        crc = static_cast<std::uint16_t>((crc << 8) ^ table[((crc >> 8) ^ byte) & 0xFF]);
    }
    return crc;
}

Bytes encode_payload(const Message& msg) {
    Writer w;
    std::visit(PayloadWriter{w}, msg);
    return w.take();
}

Bytes encode_raw(std::uint8_t msg_type, std::span<const std::uint8_t> payload) {
    if (payload.size() > kMaxPayload) throw ProtocolError("OversizePayload: " + std::to_string(payload.size()) + " bytes");
    Writer w;
    w.u8(kMagic0);
    w.u8(kMagic1);
    w.u8(kVersion);
    w.u8(msg_type);
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.bytes(payload);
    auto frame = w.take();
    const auto crc = crc16_ccitt_false(std::span(frame).subspan(3));
    frame.push_back(static_cast<std::uint8_t>(crc >> 8));
    frame.push_back(static_cast<std::uint8_t>(crc));
    return frame;
}

Bytes encode(const Message& msg) {
    const auto payload = encode_payload(msg);
    return encode_raw(static_cast<std::uint8_t>(type_of(msg)), payload);
}

std::optional<Message> decode_payload(std::uint8_t msg_type, std::span<const std::uint8_t> payload,
                                      DecodeIssue* issue) {
    DecodeIssue local{};
    if (!known_type(msg_type)) {
        if (issue) *issue = DecodeIssue::UnknownType;
        return std::nullopt;
    }
    Reader r(payload);
    auto m = parse(static_cast<MsgType>(msg_type), r, local);
    if (!m && issue) *issue = local;
    return m;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
    compact();
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

void FrameDecoder::compact() {
    if (pos_ > 0 && (pos_ >= 4096 || pos_ * 2 >= buffer_.size())) {
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos_));
        pos_ = 0;
    }
}

std::optional<Message> FrameDecoder::next() {
    while (true) {
        const std::size_t avail = buffer_.size() - pos_;
        if (avail < 2) {
            // A lone non-magic byte can never start a frame.
            if (avail == 1 && buffer_[pos_] != kMagic0) {
                ++pos_;
                ++stats_.bad_magic_bytes;
            }
            return std::nullopt;
        }
        const auto* p = buffer_.data() + pos_;
        if (p[0] != kMagic0 || p[1] != kMagic1) {
            ++pos_;
            ++stats_.bad_magic_bytes;
            continue;
        }
        if (avail < kHeaderSize) return std::nullopt;
        const std::uint32_t len = (std::uint32_t{p[4]} << 24) | (std::uint32_t{p[5]} << 16) |
                                  (std::uint32_t{p[6]} << 8) | std::uint32_t{p[7]};
        if (p[2] != kVersion || len > kMaxPayload) {
            ++pos_;
            ++stats_.bad_magic_bytes;
            continue;
        }
        const std::size_t total = kHeaderSize + len + kCrcSize;
        if (avail < total) return std::nullopt;  // truncated, wait for more

        const auto crc = crc16_ccitt_false(std::span(p + 3, 5 + len));
        const auto wire_crc = static_cast<std::uint16_t>((p[total - 2] << 8) | p[total - 1]);
        if (crc != wire_crc) {
            ++stats_.bad_crc;
            ++pos_;
            continue;
        }
        DecodeIssue issue{};
        auto msg = decode_payload(p[3], std::span(p + kHeaderSize, len), &issue);
        pos_ += total;
        if (!msg) {
            ++stats_.unknown_type;
            continue;
        }
        ++stats_.frames_ok;
        return msg;
    }
}

}  // namespace roboplat::protocol
