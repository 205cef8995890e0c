#pragma once

#include <array>
#include <cstdint>

#include "roboplat/dataset/records.hpp"

namespace roboplat::bridge {

using dataset::Vec3;

struct Attitude {
    double roll{0.0};
    double pitch{0.0};
    bool operator==(const Attitude&) const = default;
};

inline constexpr double kDefaultAlpha = 0.98;

/// Roll and pitch implied by a gravity-only accelerometer reading.
Attitude accel_attitude(const Vec3& accel);

/// One complementary filter step. gyro[0] and gyro[1] are the roll and pitch
/// rates in rad/s. A near-zero accel norm falls back to the gyro term alone.
/// Throws std::invalid_argument if dt <= 0.
Attitude complementary_filter(const Attitude& prev, const Vec3& gyro, const Vec3& accel, double dt,
                              double alpha = kDefaultAlpha);

struct MixerState {
    double base_throttle{0.0};  // 0..1000
    double kp_roll{200.0};
    double kd_roll{20.0};
    double kp_pitch{200.0};
    double kd_pitch{20.0};
    std::array<std::uint16_t, 4> last_pwm{};
};

/// X-frame mixing of a PD correction on attitude:
///   out_i = clamp(base + s_roll(i)(kp r + kd r') + s_pitch(i)(kp p + kd p'), 0, 1000)
/// with s_roll = (+,-,-,+) and s_pitch = (+,+,-,-).
std::array<std::uint16_t, 4> mix_pwm(const MixerState& m, const Attitude& att, const Attitude& rate);

}  // namespace roboplat::bridge
