#include "roboplat/tools/imu_align.hpp"

#include <algorithm>
#include <sstream>

#include "roboplat/dataset/line_codec.hpp"

namespace roboplat::tools {

using dataset::ImuSample;
using dataset::Vec3;

AlignResult align_imu(const std::vector<ImuSample>& gyro, const std::vector<ImuSample>& accel) {
    if (gyro.empty() || accel.empty()) {
        throw dataset::DatasetError(dataset::ErrorCode::EmptyOverlap, "align_imu: empty input stream");
    }
    AlignResult result;
    const auto first = gyro.front().timestamp_ns;
    const auto last = gyro.back().timestamp_ns;
    const auto by_time = [](std::int64_t t, const ImuSample& s) { return t < s.timestamp_ns; };

    for (const auto& a : accel) {
        const auto t = a.timestamp_ns;
        if (t < first || t > last) {
            ++result.dropped_outside;
            continue;
        }
        if (!result.rows.empty() && result.rows.back().timestamp_ns >= t) {
            ++result.dropped_duplicates;
            continue;
        }
        // Last gyro sample with timestamp <= t.
        const auto upper = std::upper_bound(gyro.begin(), gyro.end(), t, by_time);
        const auto& lo = *(upper - 1);
        AlignedImuRow row{t, lo.axis_values, a.axis_values};
        if (lo.timestamp_ns != t) {
            const auto& hi = *upper;
            const double w = static_cast<double>(t - lo.timestamp_ns) /
                             static_cast<double>(hi.timestamp_ns - lo.timestamp_ns);
            for (int k = 0; k < 3; ++k) {
                row.gyro[k] = lo.axis_values[k] + (hi.axis_values[k] - lo.axis_values[k]) * w;
            }
        }
        result.rows.push_back(row);
    }
    if (result.rows.empty()) {
        throw dataset::DatasetError(dataset::ErrorCode::EmptyOverlap,
                                    "align_imu: accel and gyro time ranges do not overlap");
    }
    return result;
}

std::vector<ImuSample> imu_samples(const std::vector<dataset::SensorRecord>& records, std::int32_t sensor_id) {
    std::vector<ImuSample> out;
    for (const auto& r : records) {
        if (const auto* s = std::get_if<ImuSample>(&r); s && s->sensor_id == sensor_id) out.push_back(*s);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ImuSample& a, const ImuSample& b) { return a.timestamp_ns < b.timestamp_ns; });
    return out;
}

std::string format_aligned_csv(const std::vector<AlignedImuRow>& rows, const std::string& header) {
    std::ostringstream out;
    out << header << '\n';
    for (const auto& r : rows) {
        out << r.timestamp_ns;
        for (double v : r.gyro) out << ',' << dataset::format_real(v);
        for (double v : r.accel) out << ',' << dataset::format_real(v);
        out << '\n';
    }
    return out.str();
}

}  // namespace roboplat::tools
