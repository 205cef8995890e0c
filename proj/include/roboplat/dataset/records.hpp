#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace roboplat::dataset {

using Vec3 = std::array<double, 3>;

// Row schemas of the on-disk text formats. Raw and calibrated IMU files share
// a schema and differ only by the presence of the bias columns.
enum class Schema { Gyro, Accel, Mag, Gps, GnssNav, GnssMeas, Camera, Adc };

inline constexpr std::array<Schema, 8> kAllSchemas{
    Schema::Gyro, Schema::Accel,    Schema::Mag,    Schema::Gps,
    Schema::GnssNav, Schema::GnssMeas, Schema::Camera, Schema::Adc};

const char* schema_name(Schema s);

/// Gyroscope (rad/s), accelerometer (m/s^2) or magnetometer (uT) sample.
/// `bias` is present only for raw (uncalibrated) rows.
struct ImuSample {
    std::int64_t timestamp_ns{0};
    Vec3 axis_values{};
    std::optional<Vec3> bias;
    std::int32_t sensor_id{0};

    bool operator==(const ImuSample&) const = default;
};

struct GpsFix {
    std::int64_t timestamp_ns{0};
    double latitude_deg{0.0};
    double longitude_deg{0.0};
    double altitude_m{0.0};
    double velocity_mps{0.0};
    double bearing_deg{0.0};

    bool operator==(const GpsFix&) const = default;
};

struct GnssNavMessage {
    std::int64_t timestamp_ns{0};
    std::int32_t sv_id{0};
    std::int32_t nav_type{0};
    std::int32_t msg_id{0};
    std::int32_t sub_msg_id{0};
    std::vector<std::uint8_t> data;  // hex on disk

    bool operator==(const GnssNavMessage&) const = default;
};

// Raw GNSS measurement. Field semantics follow the Android GnssMeasurement
// API; values are carried opaquely.
struct GnssMeasurement {
    std::int64_t timestamp_ns{0};
    double time_offset_ns{0.0};
    std::int64_t rx_sv_time_ns{0};
    double acc_delta_range_m{0.0};
    double ps_range_rate_mps{0.0};
    double cn0_dbhz{0.0};
    double snr_db{0.0};
    double cr_freq_hz{0.0};
    std::int64_t cr_cycles{0};
    double cr_phase{0.0};
    std::int32_t sv_id{0};
    std::int32_t const_type{0};
    // Jointly present or absent.
    std::optional<double> bias_inter_signal_ns;
    std::optional<std::string> type_code;

    bool operator==(const GnssMeasurement&) const = default;
};

struct CameraIndexEntry {
    std::int64_t timestamp_ns{0};
    std::string image_path;  // relative to the camera directory

    bool operator==(const CameraIndexEntry&) const = default;
};

struct AdcSample {
    std::int64_t timestamp_ns{0};
    std::int64_t reading{0};
    std::optional<std::int32_t> channel_id;

    bool operator==(const AdcSample&) const = default;
};

using SensorRecord =
    std::variant<ImuSample, GpsFix, GnssNavMessage, GnssMeasurement, CameraIndexEntry, AdcSample>;

std::int64_t timestamp_of(const SensorRecord& r);

enum class ErrorCode {
    MalformedLine,
    NonNumericField,
    RangeViolation,
    PathExists,
    IoFailure,
    EmptySelection,
    UnknownFile,
    MissingImu,
    InsufficientSamples,
    EmptyOverlap,
};

const char* error_code_name(ErrorCode c);

class DatasetError : public std::runtime_error {
public:
    DatasetError(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

bool is_image_path(const std::string& path);

}  // namespace roboplat::dataset
