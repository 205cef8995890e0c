#include "roboplat/dataset/session.hpp"

#include <algorithm>
#include <sstream>

#include "roboplat/dataset/line_codec.hpp"

namespace roboplat::dataset {
namespace {

constexpr const char* kManifestName = "manifest.txt";

std::string trim_copy(std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string camera_key(StreamKind k, const std::string& camera_id) {
    return k == StreamKind::Camera ? camera_id : std::string{};
}

void create_dirs(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DatasetError(ErrorCode::IoFailure, "cannot create " + p.string() + ": " + ec.message());
}

}  // namespace

Schema schema_of(StreamKind k) {
    switch (k) {
        case StreamKind::Gyro:
        case StreamKind::GyroRaw: return Schema::Gyro;
        case StreamKind::Accel:
        case StreamKind::AccelRaw: return Schema::Accel;
        case StreamKind::Mag:
        case StreamKind::MagRaw: return Schema::Mag;
        case StreamKind::Gps: return Schema::Gps;
        case StreamKind::GnssNav: return Schema::GnssNav;
        case StreamKind::GnssMeas: return Schema::GnssMeas;
        case StreamKind::Camera: return Schema::Camera;
        case StreamKind::Adc: return Schema::Adc;
    }
    return Schema::Gyro;
}

bool is_raw(StreamKind k) {
    return k == StreamKind::GyroRaw || k == StreamKind::AccelRaw || k == StreamKind::MagRaw;
}

const char* stream_name(StreamKind k) {
    switch (k) {
        case StreamKind::Gyro: return "gyro";
        case StreamKind::GyroRaw: return "gyro_raw";
        case StreamKind::Accel: return "accel";
        case StreamKind::AccelRaw: return "accel_raw";
        case StreamKind::Mag: return "mag";
        case StreamKind::MagRaw: return "mag_raw";
        case StreamKind::Gps: return "gps";
        case StreamKind::GnssNav: return "gnss_nav";
        case StreamKind::GnssMeas: return "gnss_meas";
        case StreamKind::Camera: return "camera";
        case StreamKind::Adc: return "adc";
    }
    return "?";
}

std::optional<StreamKind> stream_from_name(std::string_view name) {
    for (auto k : kAllStreams) {
        if (name == stream_name(k)) return k;
    }
    return std::nullopt;
}

std::string header_line(StreamKind k) {
    const auto imu = [k](const char* x, const char* y, const char* z) {
        std::string h = std::string("# timestamp_ns, ") + x + ", " + y + ", " + z;
        if (is_raw(k)) h += std::string(", b_") + x + ", b_" + y + ", b_" + z;
        return h + ", sensor_id";
    };
    switch (k) {
        case StreamKind::Gyro:
        case StreamKind::GyroRaw: return imu("rx_rad_s", "ry_rad_s", "rz_rad_s");
        case StreamKind::Accel:
        case StreamKind::AccelRaw: return imu("ax_m_s2", "ay_m_s2", "az_m_s2");
        case StreamKind::Mag:
        case StreamKind::MagRaw: return imu("mx_uT", "my_uT", "mz_uT");
        case StreamKind::Gps:
            return "# timestamp_ns, latitude_deg, longitude_deg, altitude_m, velocity_mps, bearing";
        case StreamKind::GnssNav:
            return "# timestamp_ns, sv_id, nav_type, msg_id, sub_msg_id, data_bytes_hex";
        case StreamKind::GnssMeas:
            return "# timestamp_ns, time_offset_ns, rx_sv_time_ns, acc_delta_range_m, "
                   "ps_range_rate_mps, cn0_DbHz, snr_db, cr_freq_hz, cr_cycles, cr_phase, "
                   "sv_id, const_type, [bias_inter_signal_ns, type_code]";
        case StreamKind::Camera: return "# timestamp_ns, image_path";
        case StreamKind::Adc: return "# timestamp_ns, adc_reading, [adc_channel_id]";
    }
    return "#";
}

fs::path canonical_path(StreamKind k, const std::string& camera_id) {
    switch (k) {
        case StreamKind::Gyro: return "imu/gyro.txt";
        case StreamKind::GyroRaw: return "imu/gyro_raw.txt";
        case StreamKind::Accel: return "imu/accel.txt";
        case StreamKind::AccelRaw: return "imu/accel_raw.txt";
        case StreamKind::Mag: return "mag/mag.txt";
        case StreamKind::MagRaw: return "mag/mag_raw.txt";
        case StreamKind::Gps: return "gnss/gps.txt";
        case StreamKind::GnssNav: return "gnss/gnss_nav.txt";
        case StreamKind::GnssMeas: return "gnss/gnss_meas.txt";
        case StreamKind::Camera: return fs::path("camera") / camera_id / "data.txt";
        case StreamKind::Adc: return "usb/adc.txt";
    }
    return {};
}

const StreamFile* DatasetLayout::find(StreamKind k, const std::string& camera_id) const {
    for (const auto& f : files) {
        if (f.kind == k && (camera_id.empty() || f.camera_id == camera_id)) return &f;
    }
    return nullptr;
}

const LoadedStream* LoadedSession::find(StreamKind k, const std::string& camera_id) const {
    for (const auto& s : streams) {
        if (s.file.kind == k && (camera_id.empty() || s.file.camera_id == camera_id)) return &s;
    }
    return nullptr;
}

// --- writer -----------------------------------------------------------------

SessionWriter::SessionWriter(SessionWriter&&) noexcept = default;
SessionWriter& SessionWriter::operator=(SessionWriter&&) noexcept = default;
SessionWriter::~SessionWriter() = default;

SessionWriter SessionWriter::open(const fs::path& root, const std::set<StreamKind>& selected,
                                  const std::vector<std::string>& camera_ids) {
    if (selected.empty()) throw DatasetError(ErrorCode::EmptySelection, "no sensor streams selected");
    std::error_code ec;
    if (fs::exists(root, ec)) {
        if (!fs::is_directory(root, ec) || !fs::is_empty(root, ec)) {
            throw DatasetError(ErrorCode::PathExists, root.string() + " exists and is not empty");
        }
    }
    create_dirs(root);

    SessionWriter w;
    w.layout_.root = fs::absolute(root);
    for (auto kind : selected) {
        std::vector<std::string> ids{""};
        if (kind == StreamKind::Camera) {
            if (camera_ids.empty()) throw DatasetError(ErrorCode::EmptySelection, "camera selected without camera ids");
            ids = camera_ids;
        }
        for (const auto& id : ids) {
            const auto path = w.layout_.root / canonical_path(kind, id);
            create_dirs(path.parent_path());
            if (kind == StreamKind::Camera) create_dirs(path.parent_path() / "images");
            auto out = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
            if (!*out) throw DatasetError(ErrorCode::IoFailure, "cannot open " + path.string());
            *out << header_line(kind) << '\n';
            w.layout_.files.push_back({kind, id, path});
            w.outputs_[{kind, camera_key(kind, id)}] = std::move(out);
        }
    }
    return w;
}

void SessionWriter::append(StreamKind kind, const SensorRecord& record, const std::string& camera_id) {
    auto it = outputs_.find({kind, camera_key(kind, camera_id)});
    if (it == outputs_.end()) {
        throw DatasetError(ErrorCode::UnknownFile,
                           std::string("stream not selected in this session: ") + stream_name(kind));
    }
    *it->second << write_line(record) << '\n';
    if (!*it->second) throw DatasetError(ErrorCode::IoFailure, std::string("write failed: ") + stream_name(kind));
}

fs::path SessionWriter::write_calibration(const std::string& name,
                                          const std::map<std::string, std::string>& values) {
    const auto dir = layout_.root / "calibration";
    create_dirs(dir);
    const auto path = dir / (name + ".txt");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError(ErrorCode::IoFailure, "cannot open " + path.string());
    out << "# " << name << " calibration (key: value)\n";
    for (const auto& [k, v] : values) out << k << ": " << v << '\n';
    if (std::find(layout_.calibration_files.begin(), layout_.calibration_files.end(), path) ==
        layout_.calibration_files.end()) {
        layout_.calibration_files.push_back(path);
    }
    return path;
}

void SessionWriter::flush() {
    for (auto& [key, out] : outputs_) out->flush();
}

// --- reader -----------------------------------------------------------------

std::map<std::string, std::string> read_calibration(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DatasetError(ErrorCode::IoFailure, "cannot open " + file.string());
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (is_comment_or_blank(line)) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        out[trim_copy(line.substr(0, colon))] = trim_copy(line.substr(colon + 1));
    }
    return out;
}

namespace {

std::vector<StreamFile> discover_canonical(const fs::path& root) {
    std::vector<StreamFile> files;
    for (auto kind : kAllStreams) {
        if (kind == StreamKind::Camera) continue;
        const auto p = root / canonical_path(kind);
        if (fs::is_regular_file(p)) files.push_back({kind, "", p});
    }
    const auto cam_root = root / "camera";
    if (fs::is_directory(cam_root)) {
        std::vector<std::string> ids;
        for (const auto& entry : fs::directory_iterator(cam_root)) {
            if (entry.is_directory() && fs::is_regular_file(entry.path() / "data.txt")) {
                ids.push_back(entry.path().filename().string());
            }
        }
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            files.push_back({StreamKind::Camera, id, root / canonical_path(StreamKind::Camera, id)});
        }
    }
    return files;
}

std::vector<StreamFile> read_manifest(const fs::path& root, std::vector<ReadIssue>& issues) {
    const auto manifest = root / kManifestName;
    std::ifstream in(manifest, std::ios::binary);
    std::vector<StreamFile> files;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_comment_or_blank(line)) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            issues.push_back({ErrorCode::MalformedLine, manifest, lineno, "expected '<stream> = <path>'"});
            continue;
        }
        auto key = trim_copy(line.substr(0, eq));
        const auto rel = trim_copy(line.substr(eq + 1));
        std::string cam_id;
        if (const auto colon = key.find(':'); colon != std::string::npos) {
            cam_id = key.substr(colon + 1);
            key = key.substr(0, colon);
        }
        const auto kind = stream_from_name(key);
        if (!kind) {
            issues.push_back({ErrorCode::UnknownFile, manifest, lineno, "unknown stream '" + key + "'"});
            continue;
        }
        if (*kind == StreamKind::Camera && cam_id.empty()) cam_id = "0";
        const auto path = root / rel;
        if (!fs::is_regular_file(path)) {
            issues.push_back({ErrorCode::IoFailure, manifest, lineno, "listed file missing: " + rel});
            continue;
        }
        files.push_back({*kind, *kind == StreamKind::Camera ? cam_id : "", path});
    }
    return files;
}

LoadedStream load_stream(const StreamFile& file, std::vector<ReadIssue>& issues) {
    LoadedStream s;
    s.file = file;
    std::ifstream in(file.path, std::ios::binary);
    if (!in) {
        issues.push_back({ErrorCode::IoFailure, file.path, 0, "cannot open"});
        return s;
    }
    const auto schema = schema_of(file.kind);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && !line.empty() && line.front() == '#') s.header_present = true;
        if (is_comment_or_blank(line)) continue;
        try {
            s.records.push_back(parse_line(line, schema));
            s.line_numbers.push_back(lineno);
            s.column_counts.push_back(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1);
        } catch (const DatasetError& e) {
            issues.push_back({e.code(), file.path, lineno, e.what()});
        }
    }
    return s;
}

bool is_expected_extra(const fs::path& rel, const std::set<fs::path>& data_files) {
    if (data_files.count(rel) != 0) return true;
    if (rel == kManifestName) return true;
    auto it = rel.begin();
    if (it == rel.end()) return false;
    if (*it == "calibration") return true;
    // Image files referenced from camera indices.
    if (*it == "camera" && is_image_path(rel.filename().string())) return true;
    return false;
}

}  // namespace

LoadedSession read_session(const fs::path& root) {
    if (!fs::is_directory(root)) throw DatasetError(ErrorCode::IoFailure, root.string() + " is not a directory");
    LoadedSession session;
    session.layout.root = fs::absolute(root);
    const auto& r = session.layout.root;

    session.layout.files = fs::is_regular_file(r / kManifestName) ? read_manifest(r, session.issues)
                                                                  : discover_canonical(r);
    if (fs::is_directory(r / "calibration")) {
        for (const auto& entry : fs::directory_iterator(r / "calibration")) {
            if (entry.is_regular_file()) session.layout.calibration_files.push_back(entry.path());
        }
        std::sort(session.layout.calibration_files.begin(), session.layout.calibration_files.end());
    }

    std::set<fs::path> known;
    for (const auto& f : session.layout.files) known.insert(fs::relative(f.path, r));

    std::vector<fs::path> stray;
    for (const auto& entry : fs::recursive_directory_iterator(r)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), r);
        if (!is_expected_extra(rel, known)) stray.push_back(rel);
    }
    std::sort(stray.begin(), stray.end());
    for (const auto& rel : stray) {
        session.issues.push_back({ErrorCode::UnknownFile, r / rel, 0, "unrecognized file skipped"});
    }

    for (const auto& f : session.layout.files) session.streams.push_back(load_stream(f, session.issues));
    return session;
}

}  // namespace roboplat::dataset
