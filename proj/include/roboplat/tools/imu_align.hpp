#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "roboplat/dataset/records.hpp"

namespace roboplat::tools {

struct AlignedImuRow {
    std::int64_t timestamp_ns{0};
    dataset::Vec3 gyro{};   // rad/s
    dataset::Vec3 accel{};  // m/s^2

    bool operator==(const AlignedImuRow&) const = default;
};

struct AlignResult {
    std::vector<AlignedImuRow> rows;
    std::size_t dropped_outside{0};     // accel samples outside the gyro span
    std::size_t dropped_duplicates{0};  // repeated accel timestamps
};

/// Resamples gyro onto the accel timestamps that fall inside the gyro time
/// span using linear interpolation. Both streams must be sorted by time.
/// Throws DatasetError(EmptyOverlap) when no accel sample can be aligned.
AlignResult align_imu(const std::vector<dataset::ImuSample>& gyro,
                      const std::vector<dataset::ImuSample>& accel);

/// Extracts the IMU samples with the given sensor id, sorted by timestamp.
std::vector<dataset::ImuSample> imu_samples(const std::vector<dataset::SensorRecord>& records,
                                            std::int32_t sensor_id);

/// Rows as "timestamp_ns,wx,wy,wz,ax,ay,az" under a '#' header.
std::string format_aligned_csv(const std::vector<AlignedImuRow>& rows, const std::string& header);

}  // namespace roboplat::tools
