#include "roboplat/dataset/line_codec.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>

namespace roboplat::dataset {
namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

[[noreturn]] void fail(ErrorCode code, Schema schema, const std::string& detail) {
    throw DatasetError(code, std::string(schema_name(schema)) + ": " + detail);
}

template <typename Int>
Int parse_int(std::string_view f, Schema schema, const char* name) {
    Int v{};
    const auto* end = f.data() + f.size();
    const auto res = std::from_chars(f.data(), end, v);
    if (f.empty() || res.ec == std::errc::invalid_argument || res.ptr != end) {
        fail(ErrorCode::NonNumericField, schema, std::string(name) + " is not an integer: '" + std::string(f) + "'");
    }
    if (res.ec == std::errc::result_out_of_range) {
        fail(ErrorCode::RangeViolation, schema, std::string(name) + " out of range");
    }
    return v;
}

double parse_real(std::string_view f, Schema schema, const char* name) {
    double v{};
    const auto* end = f.data() + f.size();
    const auto res = std::from_chars(f.data(), end, v);
    if (f.empty() || res.ec == std::errc::invalid_argument || res.ptr != end) {
        fail(ErrorCode::NonNumericField, schema, std::string(name) + " is not a number: '" + std::string(f) + "'");
    }
    if (res.ec == std::errc::result_out_of_range || !std::isfinite(v)) {
        fail(ErrorCode::RangeViolation, schema, std::string(name) + " is not finite");
    }
    return v;
}

std::int64_t parse_timestamp(std::string_view f, Schema schema) {
    const auto t = parse_int<std::int64_t>(f, schema, "timestamp_ns");
    if (t < 0) fail(ErrorCode::RangeViolation, schema, "negative timestamp");
    return t;
}

std::int32_t parse_small_id(std::string_view f, Schema schema, const char* name) {
    const auto id = parse_int<std::int32_t>(f, schema, name);
    if (id < 0) fail(ErrorCode::RangeViolation, schema, std::string(name) + " must be non-negative");
    return id;
}

void expect_columns(const std::vector<std::string_view>& fields, Schema schema,
                    std::initializer_list<std::size_t> arities) {
    for (auto a : arities) {
        if (fields.size() == a) return;
    }
    std::string allowed;
    for (auto a : arities) {
        if (!allowed.empty()) allowed += " or ";
        allowed += std::to_string(a);
    }
    fail(ErrorCode::MalformedLine, schema,
         "expected " + allowed + " columns, got " + std::to_string(fields.size()));
}

ImuSample parse_imu(const std::vector<std::string_view>& f, Schema schema) {
    expect_columns(f, schema, {5, 8});
    ImuSample s;
    s.timestamp_ns = parse_timestamp(f[0], schema);
    for (int i = 0; i < 3; ++i) s.axis_values[i] = parse_real(f[1 + i], schema, "axis value");
    if (f.size() == 8) {
        Vec3 b{};
        for (int i = 0; i < 3; ++i) b[i] = parse_real(f[4 + i], schema, "bias");
        s.bias = b;
    }
    s.sensor_id = parse_small_id(f.back(), schema, "sensor_id");
    return s;
}

GpsFix parse_gps(const std::vector<std::string_view>& f) {
    constexpr auto schema = Schema::Gps;
    expect_columns(f, schema, {6});
    GpsFix g;
    g.timestamp_ns = parse_timestamp(f[0], schema);
    g.latitude_deg = parse_real(f[1], schema, "latitude_deg");
    g.longitude_deg = parse_real(f[2], schema, "longitude_deg");
    g.altitude_m = parse_real(f[3], schema, "altitude_m");
    g.velocity_mps = parse_real(f[4], schema, "velocity_mps");
    // Bearing outside [0,360) is accepted here and flagged by the validator.
    g.bearing_deg = parse_real(f[5], schema, "bearing");
    if (g.latitude_deg < -90.0 || g.latitude_deg > 90.0) fail(ErrorCode::RangeViolation, schema, "latitude outside [-90,90]");
    if (g.longitude_deg < -180.0 || g.longitude_deg > 180.0) fail(ErrorCode::RangeViolation, schema, "longitude outside [-180,180]");
    if (g.velocity_mps < 0.0) fail(ErrorCode::RangeViolation, schema, "negative velocity");
    return g;
}

GnssNavMessage parse_gnss_nav(const std::vector<std::string_view>& f) {
    constexpr auto schema = Schema::GnssNav;
    expect_columns(f, schema, {6});
    GnssNavMessage m;
    m.timestamp_ns = parse_timestamp(f[0], schema);
    m.sv_id = parse_int<std::int32_t>(f[1], schema, "sv_id");
    m.nav_type = parse_int<std::int32_t>(f[2], schema, "nav_type");
    m.msg_id = parse_int<std::int32_t>(f[3], schema, "msg_id");
    m.sub_msg_id = parse_int<std::int32_t>(f[4], schema, "sub_msg_id");
    try {
        m.data = from_hex(f[5]);
    } catch (const std::invalid_argument& e) {
        fail(ErrorCode::NonNumericField, schema, e.what());
    }
    return m;
}

GnssMeasurement parse_gnss_meas(const std::vector<std::string_view>& f) {
    constexpr auto schema = Schema::GnssMeas;
    expect_columns(f, schema, {12, 14});
    GnssMeasurement m;
    m.timestamp_ns = parse_timestamp(f[0], schema);
    m.time_offset_ns = parse_real(f[1], schema, "time_offset_ns");
    m.rx_sv_time_ns = parse_int<std::int64_t>(f[2], schema, "rx_sv_time_ns");
    m.acc_delta_range_m = parse_real(f[3], schema, "acc_delta_range_m");
    m.ps_range_rate_mps = parse_real(f[4], schema, "ps_range_rate_mps");
    m.cn0_dbhz = parse_real(f[5], schema, "cn0_dbhz");
    m.snr_db = parse_real(f[6], schema, "snr_db");
    m.cr_freq_hz = parse_real(f[7], schema, "cr_freq_hz");
    m.cr_cycles = parse_int<std::int64_t>(f[8], schema, "cr_cycles");
    m.cr_phase = parse_real(f[9], schema, "cr_phase");
    m.sv_id = parse_int<std::int32_t>(f[10], schema, "sv_id");
    m.const_type = parse_int<std::int32_t>(f[11], schema, "const_type");
    if (f.size() == 14) {
        m.bias_inter_signal_ns = parse_real(f[12], schema, "bias_inter_signal_ns");
        if (f[13].empty()) fail(ErrorCode::MalformedLine, schema, "empty type_code");
        m.type_code = std::string(f[13]);
    }
    return m;
}

CameraIndexEntry parse_camera(const std::vector<std::string_view>& f) {
    constexpr auto schema = Schema::Camera;
    expect_columns(f, schema, {2});
    CameraIndexEntry c;
    c.timestamp_ns = parse_timestamp(f[0], schema);
    c.image_path = std::string(f[1]);
    const std::filesystem::path p(c.image_path);
    if (c.image_path.empty() || p.is_absolute()) fail(ErrorCode::RangeViolation, schema, "image path must be relative and non-empty");
    for (const auto& part : p) {
        if (part == "..") fail(ErrorCode::RangeViolation, schema, "image path must not contain '..'");
    }
    if (!is_image_path(c.image_path)) fail(ErrorCode::RangeViolation, schema, "unrecognized image extension: " + c.image_path);
    return c;
}

AdcSample parse_adc(const std::vector<std::string_view>& f) {
    constexpr auto schema = Schema::Adc;
    expect_columns(f, schema, {2, 3});
    AdcSample a;
    a.timestamp_ns = parse_timestamp(f[0], schema);
    a.reading = parse_int<std::int64_t>(f[1], schema, "adc_reading");
    if (a.reading < 0) fail(ErrorCode::RangeViolation, schema, "negative adc reading");
    if (f.size() == 3) a.channel_id = parse_small_id(f[2], schema, "adc_channel_id");
    return a;
}

void append_real(std::string& out, double v) {
    out += ',';
    out += format_real(v);
}

template <typename Int>
void append_int(std::string& out, Int v) {
    out += ',';
    out += std::to_string(v);
}

struct Writer {
    std::string operator()(const ImuSample& s) const {
        std::string out = std::to_string(s.timestamp_ns);
        for (double v : s.axis_values) append_real(out, v);
        if (s.bias) {
            for (double v : *s.bias) append_real(out, v);
        }
        append_int(out, s.sensor_id);
        return out;
    }
    std::string operator()(const GpsFix& g) const {
        std::string out = std::to_string(g.timestamp_ns);
        append_real(out, g.latitude_deg);
        append_real(out, g.longitude_deg);
        append_real(out, g.altitude_m);
        append_real(out, g.velocity_mps);
        append_real(out, g.bearing_deg);
        return out;
    }
    std::string operator()(const GnssNavMessage& m) const {
        std::string out = std::to_string(m.timestamp_ns);
        append_int(out, m.sv_id);
        append_int(out, m.nav_type);
        append_int(out, m.msg_id);
        append_int(out, m.sub_msg_id);
        out += ',';
        out += to_hex(m.data);
        return out;
    }
    std::string operator()(const GnssMeasurement& m) const {
        std::string out = std::to_string(m.timestamp_ns);
        append_real(out, m.time_offset_ns);
        append_int(out, m.rx_sv_time_ns);
        append_real(out, m.acc_delta_range_m);
        append_real(out, m.ps_range_rate_mps);
        append_real(out, m.cn0_dbhz);
        append_real(out, m.snr_db);
        append_real(out, m.cr_freq_hz);
        append_int(out, m.cr_cycles);
        append_real(out, m.cr_phase);
        append_int(out, m.sv_id);
        append_int(out, m.const_type);
        if (m.bias_inter_signal_ns && m.type_code) {
            append_real(out, *m.bias_inter_signal_ns);
            out += ',';
            out += *m.type_code;
        }
        return out;
    }
    std::string operator()(const CameraIndexEntry& c) const {
        return std::to_string(c.timestamp_ns) + "," + c.image_path;
    }
    std::string operator()(const AdcSample& a) const {
        std::string out = std::to_string(a.timestamp_ns);
        append_int(out, a.reading);
        if (a.channel_id) append_int(out, *a.channel_id);
        return out;
    }
};

}  // namespace

bool is_comment_or_blank(std::string_view line) {
    line = trim(line);
    return line.empty() || line.front() == '#';
}

std::string format_real(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

std::string to_hex(const std::vector<std::uint8_t>& bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out += kDigits[b >> 4];
        out += kDigits[b & 0x0F];
    }
    return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw std::invalid_argument("hex string has odd length");
    const auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw std::invalid_argument(std::string("invalid hex digit '") + c + "'");
    };
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
    }
    return out;
}

SensorRecord parse_line(std::string_view line, Schema schema) {
    const auto fields = split_fields(line);
    switch (schema) {
        case Schema::Gyro:
        case Schema::Accel:
        case Schema::Mag: return parse_imu(fields, schema);
        case Schema::Gps: return parse_gps(fields);
        case Schema::GnssNav: return parse_gnss_nav(fields);
        case Schema::GnssMeas: return parse_gnss_meas(fields);
        case Schema::Camera: return parse_camera(fields);
        case Schema::Adc: return parse_adc(fields);
    }
    fail(ErrorCode::MalformedLine, schema, "unknown schema");
}

std::string write_line(const SensorRecord& record) {
    return std::visit(Writer{}, record);
}

}  // namespace roboplat::dataset
