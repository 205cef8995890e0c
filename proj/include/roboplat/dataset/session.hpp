#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roboplat/dataset/records.hpp"

namespace roboplat::dataset {

namespace fs = std::filesystem;

// One kind of data file inside a recording session.
enum class StreamKind {
    Gyro,
    GyroRaw,
    Accel,
    AccelRaw,
    Mag,
    MagRaw,
    Gps,
    GnssNav,
    GnssMeas,
    Camera,
    Adc,
};

inline constexpr std::array<StreamKind, 11> kAllStreams{
    StreamKind::Gyro,  StreamKind::GyroRaw,  StreamKind::Accel,   StreamKind::AccelRaw,
    StreamKind::Mag,   StreamKind::MagRaw,   StreamKind::Gps,     StreamKind::GnssNav,
    StreamKind::GnssMeas, StreamKind::Camera, StreamKind::Adc};

Schema schema_of(StreamKind k);
bool is_raw(StreamKind k);
const char* stream_name(StreamKind k);
std::optional<StreamKind> stream_from_name(std::string_view name);

/// Column header written as the first line of every data file.
std::string header_line(StreamKind k);

/// Canonical path of a data file relative to the session root. Camera index
/// files live at camera/<cam_id>/data.txt.
fs::path canonical_path(StreamKind k, const std::string& camera_id = "0");

struct StreamFile {
    StreamKind kind;
    std::string camera_id;  // only for StreamKind::Camera
    fs::path path;          // absolute

    bool operator==(const StreamFile&) const = default;
};

// The folder/file tree of one recording session.
struct DatasetLayout {
    fs::path root;
    std::vector<StreamFile> files;
    std::vector<fs::path> calibration_files;

    const StreamFile* find(StreamKind k, const std::string& camera_id = "") const;
};

/// Single-owner writer for a new recording session.
class SessionWriter {
public:
    /// Creates the directory tree for the selected streams and writes every
    /// header. `root` must not exist or be empty.
    static SessionWriter open(const fs::path& root, const std::set<StreamKind>& selected,
                              const std::vector<std::string>& camera_ids = {"0"});

    SessionWriter(SessionWriter&&) noexcept;
    SessionWriter& operator=(SessionWriter&&) noexcept;
    ~SessionWriter();

    void append(StreamKind kind, const SensorRecord& record, const std::string& camera_id = "0");

    /// Writes calibration/<name>.txt as "key: value" lines.
    fs::path write_calibration(const std::string& name,
                               const std::map<std::string, std::string>& values);

    void flush();

    const DatasetLayout& layout() const { return layout_; }

private:
    SessionWriter() = default;

    DatasetLayout layout_;
    std::map<std::pair<StreamKind, std::string>, std::unique_ptr<std::ofstream>> outputs_;
};

struct ReadIssue {
    ErrorCode code;
    fs::path file;
    std::size_t line{0};  // 1-based, 0 when not line specific
    std::string message;
};

struct LoadedStream {
    StreamFile file;
    bool header_present{false};
    std::vector<SensorRecord> records;
    std::vector<std::size_t> line_numbers;  // parallel to records
    std::vector<std::size_t> column_counts; // parallel to records
};

struct LoadedSession {
    DatasetLayout layout;
    std::vector<LoadedStream> streams;
    std::vector<ReadIssue> issues;

    const LoadedStream* find(StreamKind k, const std::string& camera_id = "") const;
};

/// Reads every recognized data file under `root`. A `manifest.txt` file with
/// lines "<stream>[:<camera_id>] = <relative path>" replaces the canonical
/// names. Malformed lines and stray files are reported in `issues` and skipped.
LoadedSession read_session(const fs::path& root);

std::map<std::string, std::string> read_calibration(const fs::path& file);

}  // namespace roboplat::dataset
