#include "roboplat/tools/euroc_export.hpp"

#include <fstream>
#include <sstream>

#include "roboplat/tools/imu_align.hpp"

namespace roboplat::tools {

namespace fs = std::filesystem;
using dataset::DatasetError;
using dataset::ErrorCode;
using dataset::StreamKind;

namespace {

constexpr const char* kImuHeader =
    "#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y [rad s^-1],w_RS_S_z [rad s^-1],"
    "a_RS_S_x [m s^-2],a_RS_S_y [m s^-2],a_RS_S_z [m s^-2]";
constexpr const char* kCamHeader = "#timestamp [ns],filename";

void write_file(const fs::path& path, const std::string& content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw DatasetError(ErrorCode::IoFailure, "cannot write " + path.string());
}

const dataset::LoadedStream* pick(const dataset::LoadedSession& s, StreamKind preferred, StreamKind fallback) {
    if (const auto* p = s.find(preferred); p && !p->records.empty()) return p;
    if (const auto* f = s.find(fallback); f && !f->records.empty()) return f;
    return nullptr;
}

}  // namespace

EurocReport export_euroc(const dataset::LoadedSession& session, const fs::path& out,
                         const EurocOptions& options) {
    EurocReport report;
    const auto* gyro = pick(session, StreamKind::Gyro, StreamKind::GyroRaw);
    const auto* accel = pick(session, StreamKind::Accel, StreamKind::AccelRaw);
    if (!gyro || !accel) throw DatasetError(ErrorCode::MissingImu, "session has no gyro and accel data");
    report.used_raw_imu = dataset::is_raw(gyro->file.kind) || dataset::is_raw(accel->file.kind);
    if (report.used_raw_imu) report.notes.push_back("calibrated IMU missing; raw (uncalibrated) values exported");

    const auto g = imu_samples(gyro->records, options.imu_id);
    const auto a = imu_samples(accel->records, options.imu_id);
    if (g.empty() || a.empty()) {
        throw DatasetError(ErrorCode::MissingImu, "no IMU samples with sensor_id " + std::to_string(options.imu_id));
    }
    const auto aligned = align_imu(g, a);
    report.imu_rows = aligned.rows.size();
    report.dropped_accel = aligned.dropped_outside + aligned.dropped_duplicates;
    write_file(out / "mav0/imu0/data.csv", format_aligned_csv(aligned.rows, kImuHeader));

    const dataset::LoadedStream* cam = nullptr;
    if (options.camera_id) {
        cam = session.find(StreamKind::Camera, *options.camera_id);
        if (!cam) report.notes.push_back("camera " + *options.camera_id + " not found; imu-only export");
    } else {
        cam = session.find(StreamKind::Camera);
        if (!cam) report.notes.push_back("no camera index; imu-only export");
    }
    if (cam) {
        std::ostringstream csv;
        csv << kCamHeader << '\n';
        const auto cam_dir = cam->file.path.parent_path();
        for (const auto& r : cam->records) {
            const auto& e = std::get<dataset::CameraIndexEntry>(r);
            const auto name = fs::path(e.image_path).filename();
            csv << e.timestamp_ns << ',' << name.string() << '\n';
            const auto src = cam_dir / e.image_path;
            if (fs::is_regular_file(src)) {
                const auto dst = out / "mav0/cam0/data" / name;
                std::error_code ec;
                fs::create_directories(dst.parent_path(), ec);
                fs::copy_file(src, dst, fs::copy_options::overwrite_existing, ec);
                if (ec) throw DatasetError(ErrorCode::IoFailure, "cannot copy " + src.string());
                ++report.images_copied;
            } else {
                ++report.images_missing;
            }
        }
        write_file(out / "mav0/cam0/data.csv", csv.str());
        report.camera_exported = true;
        report.camera_rows = cam->records.size();
        if (report.images_missing > 0) {
            report.notes.push_back(std::to_string(report.images_missing) + " referenced image(s) missing on disk");
        }
    }
    return report;
}

}  // namespace roboplat::tools
