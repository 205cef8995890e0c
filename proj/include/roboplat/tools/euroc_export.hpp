#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "roboplat/dataset/session.hpp"

namespace roboplat::tools {

struct EurocOptions {
    std::optional<std::string> camera_id;  // first camera when unset
    std::int32_t imu_id{0};
};

struct EurocReport {
    std::size_t imu_rows{0};
    std::size_t dropped_accel{0};
    bool used_raw_imu{false};
    bool camera_exported{false};
    std::size_t camera_rows{0};
    std::size_t images_copied{0};
    std::size_t images_missing{0};
    std::vector<std::string> notes;
};

/// Writes <out>/mav0/imu0/data.csv and, when a camera index exists,
/// <out>/mav0/cam0/data.csv plus copies of the referenced images.
EurocReport export_euroc(const dataset::LoadedSession& session, const std::filesystem::path& out,
                         const EurocOptions& options = {});

}  // namespace roboplat::tools
