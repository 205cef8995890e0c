#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "roboplat/dataset/session.hpp"

namespace roboplat::tools {

// Per-sensor acquisition timing, in the shape of a mean-period/period-std/
// sample-count/duration table.
struct TimingStats {
    std::string sensor;
    std::optional<std::int32_t> sensor_id;  // empty for single-id and pooled rows
    bool pooled{false};
    double mean_period_s{0.0};
    double period_std_s{0.0};
    std::size_t sample_count{0};
    double duration_s{0.0};
    bool defined{false};  // false when fewer than two samples
};

struct StatsReport {
    std::vector<TimingStats> rows;
    std::vector<std::string> diagnostics;
};

/// Statistics of one timestamp stream. Sorts a copy when out of order and
/// sets `was_sorted` to false in that case.
TimingStats timing_from_timestamps(std::string sensor, std::vector<std::int64_t> timestamps_ns,
                                   bool* was_sorted = nullptr);

/// One row per present data file and sensor id; files with more than one id
/// also get a pooled row combining the per-id periods.
StatsReport compute_stats(const dataset::LoadedSession& session);

std::string stats_csv(const StatsReport& report);
std::string stats_table(const StatsReport& report);

}  // namespace roboplat::tools
