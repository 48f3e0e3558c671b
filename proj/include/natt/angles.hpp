#pragma once

#include <array>
#include <optional>

namespace natt {

// Attitude as aerospace ZYX (yaw-pitch-roll) Euler angles, radians. Yaw is
// unobservable from gravity so estimators only carry pitch and roll.
struct EulerAngles {
  double pitch = 0.0;
  double roll = 0.0;
};

using Vec3 = std::array<double, 3>;

// Hamilton-convention unit quaternion representing the body-to-world
// rotation: rotate() maps body-frame vectors into the world frame.
struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  [[nodiscard]] Quaternion conjugate() const { return {w, -x, -y, -z}; }
  [[nodiscard]] double norm() const;
  [[nodiscard]] Quaternion normalized() const;
  [[nodiscard]] Vec3 rotate(const Vec3& v) const;
};

// Hamilton product a ⊗ b.
Quaternion hamilton(const Quaternion& a, const Quaternion& b);

// Embeds a 3-vector as a pure quaternion (0, v).
Quaternion pure(const Vec3& v);

Quaternion quat_from_axis_angle(const Vec3& axis, double angle);

// ZYX composition R = Rz(yaw) Ry(pitch) Rx(roll).
Quaternion quat_from_euler(double pitch, double roll, double yaw = 0.0);

// Extracts pitch/roll from a body-to-world quaternion. Pitch is clamped to
// +/- pi/2 at gimbal lock instead of producing NaN.
EulerAngles quat_to_euler(const Quaternion& q);

// Tilt implied by a specific-force reading assuming it measures gravity
// only: roll = atan2(ay, az), pitch = atan2(-ax, sqrt(ay^2 + az^2)).
// Returns nullopt when |a| <= min_norm (free fall: attitude unobservable).
std::optional<EulerAngles> accel_to_angles(const Vec3& accel,
                                           double min_norm = 0.1);

// Gravity expressed in the body frame for a given attitude:
// g * (-sin(pitch), sin(roll) cos(pitch), cos(roll) cos(pitch)).
Vec3 gravity_in_body(double pitch, double roll);

}  // namespace natt
