#include "roboplat/dataset/records.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>

namespace roboplat::dataset {

const char* schema_name(Schema s) {
    switch (s) {
        case Schema::Gyro: return "gyro";
        case Schema::Accel: return "accel";
        case Schema::Mag: return "mag";
        case Schema::Gps: return "gps";
        case Schema::GnssNav: return "gnss_nav";
        case Schema::GnssMeas: return "gnss_meas";
        case Schema::Camera: return "camera";
        case Schema::Adc: return "adc";
    }
    return "?";
}

const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::NonNumericField: return "NonNumericField";
        case ErrorCode::RangeViolation: return "RangeViolation";
        case ErrorCode::PathExists: return "PathExists";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::EmptySelection: return "EmptySelection";
        case ErrorCode::UnknownFile: return "UnknownFile";
        case ErrorCode::MissingImu: return "MissingImu";
        case ErrorCode::InsufficientSamples: return "InsufficientSamples";
        case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    }
    return "?";
}

std::int64_t timestamp_of(const SensorRecord& r) {
    return std::visit([](const auto& rec) { return rec.timestamp_ns; }, r);
}

bool is_image_path(const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp";
}

}  // namespace roboplat::dataset
