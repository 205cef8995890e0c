#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "roboplat/transport/connection.hpp"

namespace roboplat::transport {

struct ShapingParams {
    Nanos one_way_delay{0};
    /// Bytes per second; nullopt means unlimited.
    std::optional<double> bandwidth_Bps;
    Nanos jitter_std{0};
    std::uint64_t seed{1};

    /// Throws std::invalid_argument on negative delay or jitter, or a
    /// non-positive bandwidth.
    void validate() const;
};

/// Wraps `inner` so that bytes in both directions arrive `one_way_delay`
/// (plus Gaussian jitter, truncated at zero) later than they otherwise
/// would. Outgoing writes are additionally serialized at the configured
/// bandwidth. Content and order are preserved.
ConnectionPtr shape(ConnectionPtr inner, const ShapingParams& params);

/// Parses "delay=5ms,bw=8KiB,jitter=1ms,seed=3". Durations take ns/us/ms/s
/// suffixes; bandwidth is bytes per second with optional KiB/MiB suffix or
/// "inf". Missing keys keep their defaults. Throws std::invalid_argument.
ShapingParams parse_shaping(std::string_view text);

/// Parses a duration such as "5ms", "250us" or "1.5s".
Nanos parse_duration(std::string_view text);

/// Serialization time of `bytes` at `bandwidth_Bps`, rounded to the nanosecond.
Nanos serialization_time(std::size_t bytes, std::optional<double> bandwidth_Bps);

}  // namespace roboplat::transport
