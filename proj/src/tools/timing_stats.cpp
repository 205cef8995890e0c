#include "roboplat/tools/timing_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "roboplat/dataset/line_codec.hpp"

namespace roboplat::tools {
namespace {

constexpr double kNsPerSecond = 1e9;

// Sample standard deviation of a list of periods, in nanoseconds.
double sample_std(const std::vector<double>& periods_ns) {
    if (periods_ns.size() < 2) return 0.0;
    double sum = 0.0;
    for (double p : periods_ns) sum += p;
    const double mean = sum / static_cast<double>(periods_ns.size());
    double sq = 0.0;
    for (double p : periods_ns) sq += (p - mean) * (p - mean);
    return std::sqrt(sq / static_cast<double>(periods_ns.size() - 1));
}

std::vector<double> periods_of(const std::vector<std::int64_t>& sorted) {
    std::vector<double> out;
    for (std::size_t i = 1; i < sorted.size(); ++i) out.push_back(static_cast<double>(sorted[i] - sorted[i - 1]));
    return out;
}

std::optional<std::int32_t> id_of(const dataset::SensorRecord& r) {
    if (const auto* imu = std::get_if<dataset::ImuSample>(&r)) return imu->sensor_id;
    if (const auto* adc = std::get_if<dataset::AdcSample>(&r)) return adc->channel_id;
    return std::nullopt;
}

std::string stream_label(const dataset::LoadedStream& s) {
    std::string label = dataset::stream_name(s.file.kind);
    if (s.file.kind == dataset::StreamKind::Camera) label += "/" + s.file.camera_id;
    return label;
}

}  // namespace

TimingStats timing_from_timestamps(std::string sensor, std::vector<std::int64_t> ts, bool* was_sorted) {
    const bool sorted = std::is_sorted(ts.begin(), ts.end());
    if (!sorted) std::sort(ts.begin(), ts.end());
    if (was_sorted) *was_sorted = sorted;

    TimingStats st;
    st.sensor = std::move(sensor);
    st.sample_count = ts.size();
    if (ts.size() < 2) return st;
    st.defined = true;
    const auto span_ns = static_cast<double>(ts.back() - ts.front());
    st.duration_s = span_ns / kNsPerSecond;
    st.mean_period_s = span_ns / static_cast<double>(ts.size() - 1) / kNsPerSecond;
    st.period_std_s = sample_std(periods_of(ts)) / kNsPerSecond;
    return st;
}

StatsReport compute_stats(const dataset::LoadedSession& session) {
    StatsReport report;
    for (const auto& stream : session.streams) {
        const auto label = stream_label(stream);
        std::map<std::optional<std::int32_t>, std::vector<std::int64_t>> by_id;
        for (const auto& r : stream.records) by_id[id_of(r)].push_back(dataset::timestamp_of(r));
        if (by_id.empty()) by_id[std::nullopt];

        std::vector<double> pooled_periods;
        std::size_t pooled_count = 0;
        double pooled_span_ns = 0.0;
        for (auto& [id, ts] : by_id) {
            const bool multi = by_id.size() > 1;
            const auto name = multi && id ? label + "[" + std::to_string(*id) + "]" : label;
            bool was_sorted = true;
            auto row = timing_from_timestamps(name, ts, &was_sorted);
            if (multi) row.sensor_id = id;
            if (!was_sorted) report.diagnostics.push_back(name + ": timestamps out of order, sorted before analysis");
            if (!row.defined) {
                report.diagnostics.push_back(name + ": InsufficientSamples (" + std::to_string(row.sample_count) +
                                             " sample(s), need at least 2)");
            }
            if (multi) {
                std::sort(ts.begin(), ts.end());
                auto p = periods_of(ts);
                pooled_periods.insert(pooled_periods.end(), p.begin(), p.end());
                pooled_count += ts.size();
                if (ts.size() >= 2) pooled_span_ns += static_cast<double>(ts.back() - ts.front());
            }
            report.rows.push_back(std::move(row));
        }
        if (by_id.size() > 1) {
            TimingStats pooled;
            pooled.sensor = label + "[pooled]";
            pooled.pooled = true;
            pooled.sample_count = pooled_count;
            pooled.defined = !pooled_periods.empty();
            if (pooled.defined) {
                pooled.duration_s = pooled_span_ns / kNsPerSecond;
                pooled.mean_period_s = pooled_span_ns / static_cast<double>(pooled_periods.size()) / kNsPerSecond;
                pooled.period_std_s = sample_std(pooled_periods) / kNsPerSecond;
            }
            report.rows.push_back(std::move(pooled));
        }
    }
    return report;
}

std::string stats_csv(const StatsReport& report) {
    std::ostringstream out;
    out << "# sensor,mean_period_s,period_std_s,number_of_samples,duration_s\n";
    for (const auto& r : report.rows) {
        out << r.sensor << ',';
        if (r.defined) {
            out << dataset::format_real(r.mean_period_s) << ',' << dataset::format_real(r.period_std_s);
        } else {
            out << ',';
        }
        out << ',' << r.sample_count << ',';
        if (r.defined) out << dataset::format_real(r.duration_s);
        out << '\n';
    }
    return out.str();
}

std::string stats_table(const StatsReport& report) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-22s %12s %12s %10s %12s\n", "Sensor", "Mean Period", "Period STD",
                  "Samples", "Duration");
    out << buf;
    std::snprintf(buf, sizeof(buf), "%-22s %12s %12s %10s %12s\n", "", "(s)", "(s)", "", "(s)");
    out << buf;
    for (const auto& r : report.rows) {
        if (r.defined) {
            std::snprintf(buf, sizeof(buf), "%-22s %12.4f %12.4f %10zu %12.3f\n", r.sensor.c_str(),
                          r.mean_period_s, r.period_std_s, r.sample_count, r.duration_s);
        } else {
            std::snprintf(buf, sizeof(buf), "%-22s %12s %12s %10zu %12s\n", r.sensor.c_str(), "-", "-",
                          r.sample_count, "-");
        }
        out << buf;
    }
    return out.str();
}

}  // namespace roboplat::tools
