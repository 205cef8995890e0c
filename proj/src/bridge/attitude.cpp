#include "roboplat/bridge/attitude.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roboplat::bridge {

namespace {

constexpr std::array<int, 4> kRoll{+1, -1, -1, +1};
constexpr std::array<int, 4> kPitch{+1, +1, -1, -1};

}  // namespace

Attitude accel_attitude(const Vec3& a) {
    return {std::atan2(a[1], a[2]), std::atan2(-a[0], std::sqrt(a[1] * a[1] + a[2] * a[2]))};
}

Attitude complementary_filter(const Attitude& prev, const Vec3& gyro, const Vec3& accel, double dt, double alpha) {
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    const Attitude integrated{prev.roll + gyro[0] * dt, prev.pitch + gyro[1] * dt};
    const double norm = std::sqrt(accel[0] * accel[0] + accel[1] * accel[1] + accel[2] * accel[2]);
    if (norm < 1e-9) return integrated;
    const Attitude measured = accel_attitude(accel);
    return {alpha * integrated.roll + (1 - alpha) * measured.roll,
            alpha * integrated.pitch + (1 - alpha) * measured.pitch};
}

std::array<std::uint16_t, 4> mix_pwm(const MixerState& m, const Attitude& att, const Attitude& rate) {
    const double roll_term = m.kp_roll * att.roll + m.kd_roll * rate.roll;
    const double pitch_term = m.kp_pitch * att.pitch + m.kd_pitch * rate.pitch;
    std::array<std::uint16_t, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) {
        const double v = m.base_throttle + kRoll[i] * roll_term + kPitch[i] * pitch_term;
        const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1000.0) : 0.0;
        out[i] = static_cast<std::uint16_t>(std::llround(c));
    }
    return out;
}

}  // namespace roboplat::bridge
