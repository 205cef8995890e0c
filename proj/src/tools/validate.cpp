#include "roboplat/tools/validate.hpp"

#include <algorithm>
#include <charconv>
#include <set>

namespace roboplat::tools {

namespace fs = std::filesystem;
using dataset::StreamKind;

namespace {

struct AdcLimits {
    std::optional<std::int64_t> max_reading;  // exclusive
    std::optional<std::int32_t> channels;
};

std::optional<std::int64_t> to_int(const std::string& s) {
    std::int64_t v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

AdcLimits adc_limits(const dataset::LoadedSession& session) {
    AdcLimits limits;
    for (const auto& f : session.layout.calibration_files) {
        if (f.filename() != "device.txt") continue;
        const auto kv = dataset::read_calibration(f);
        if (auto it = kv.find("resolution_bits"); it != kv.end()) {
            if (auto bits = to_int(it->second); bits && *bits > 0 && *bits < 63) {
                limits.max_reading = std::int64_t{1} << *bits;
            }
        }
        if (auto it = kv.find("adc_channels"); it != kv.end()) {
            if (auto ch = to_int(it->second)) limits.channels = static_cast<std::int32_t>(*ch);
        }
    }
    return limits;
}

class Checker {
public:
    explicit Checker(ValidationReport& report) : report_(report) {}

    void error(std::string code, const fs::path& file, std::size_t line, std::string msg) {
        report_.diagnostics.push_back({Severity::Error, std::move(code), file, line, std::move(msg)});
    }
    void warning(std::string code, const fs::path& file, std::size_t line, std::string msg) {
        report_.diagnostics.push_back({Severity::Warning, std::move(code), file, line, std::move(msg)});
    }

private:
    ValidationReport& report_;
};

void check_stream(const dataset::LoadedStream& s, const AdcLimits& adc, Checker& check) {
    const auto& path = s.file.path;
    if (!s.header_present) check.error("MissingHeader", path, 1, "first line is not a '#' header");

    for (std::size_t i = 1; i < s.records.size(); ++i) {
        const auto prev = dataset::timestamp_of(s.records[i - 1]);
        const auto cur = dataset::timestamp_of(s.records[i]);
        if (cur < prev) {
            check.error("NonMonotonicTimestamp", path, s.line_numbers[i],
                        "timestamp " + std::to_string(cur) + " precedes previous " + std::to_string(prev));
        }
    }

    const auto kind = s.file.kind;
    const auto schema = dataset::schema_of(kind);
    const bool imu_like = schema == dataset::Schema::Gyro || schema == dataset::Schema::Accel ||
                          schema == dataset::Schema::Mag;
    if (imu_like) {
        const std::size_t expected = dataset::is_raw(kind) ? 8 : 5;
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            if (s.column_counts[i] != expected) {
                check.error("ArityMismatch", path, s.line_numbers[i],
                            std::to_string(s.column_counts[i]) + " columns, " +
                                (dataset::is_raw(kind) ? "raw" : "calibrated") + " file expects " +
                                std::to_string(expected));
            }
        }
    }
    if (kind == StreamKind::Adc && !s.records.empty()) {
        const auto first = s.column_counts.front();
        for (std::size_t i = 1; i < s.records.size(); ++i) {
            if (s.column_counts[i] != first) {
                check.error("ArityMismatch", path, s.line_numbers[i], "adc rows mix 2- and 3-column forms");
            }
        }
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            const auto& a = std::get<dataset::AdcSample>(s.records[i]);
            if (adc.max_reading && a.reading >= *adc.max_reading) {
                check.error("AdcOutOfRange", path, s.line_numbers[i],
                            "reading " + std::to_string(a.reading) + " exceeds configured resolution");
            }
            if (adc.channels && a.channel_id && *a.channel_id >= *adc.channels) {
                check.error("AdcOutOfRange", path, s.line_numbers[i],
                            "channel " + std::to_string(*a.channel_id) + " not configured");
            }
        }
    }
    if (kind == StreamKind::Gps) {
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            const auto b = std::get<dataset::GpsFix>(s.records[i]).bearing_deg;
            if (b < 0.0 || b >= 360.0) {
                check.warning("BearingOutOfRange", path, s.line_numbers[i], "bearing outside [0,360)");
            }
        }
    }
    if (kind == StreamKind::Camera) {
        const auto dir = path.parent_path();
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            const auto& e = std::get<dataset::CameraIndexEntry>(s.records[i]);
            if (!fs::is_regular_file(dir / e.image_path)) {
                check.error("MissingImage", path, s.line_numbers[i], "image not found: " + e.image_path);
            }
        }
    }
}

}  // namespace

std::size_t ValidationReport::error_count() const {
    return static_cast<std::size_t>(std::count_if(diagnostics.begin(), diagnostics.end(),
                                                  [](const Diagnostic& d) { return d.severity == Severity::Error; }));
}

std::size_t ValidationReport::warning_count() const {
    return diagnostics.size() - error_count();
}

ValidationReport validate(const dataset::LoadedSession& session) {
    ValidationReport report;
    Checker check(report);
    for (const auto& issue : session.issues) {
        const auto code = dataset::error_code_name(issue.code);
        if (issue.code == dataset::ErrorCode::UnknownFile) {
            check.warning(code, issue.file, issue.line, issue.message);
        } else {
            check.error(code, issue.file, issue.line, issue.message);
        }
    }
    const auto adc = adc_limits(session);
    for (const auto& s : session.streams) check_stream(s, adc, check);
    return report;
}

std::string format_diagnostic(const Diagnostic& d) {
    std::string out = d.severity == Severity::Error ? "error" : "warning";
    out += " [" + d.code + "] " + d.file.string();
    if (d.line > 0) out += ":" + std::to_string(d.line);
    out += ": " + d.message;
    return out;
}

}  // namespace roboplat::tools
