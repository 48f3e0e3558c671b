#include "natt/angles.hpp"

#include <algorithm>
#include <cmath>

#include "natt/common.hpp"

namespace natt {

double Quaternion::norm() const {
  return std::sqrt(w * w + x * x + y * y + z * z);
}

Quaternion Quaternion::normalized() const {
  double n = norm();
  if (n == 0.0) return {1.0, 0.0, 0.0, 0.0};
  return {w / n, x / n, y / n, z / n};
}

Vec3 Quaternion::rotate(const Vec3& v) const {
  // q v q* expanded via the rotation matrix rows; cheaper and identical in
  // exact arithmetic to the double Hamilton product.
  const double ww = w * w, xx = x * x, yy = y * y, zz = z * z;
  const double wx = w * x, wy = w * y, wz = w * z;
  const double xy = x * y, xz = x * z, yz = y * z;
  return {
      (ww + xx - yy - zz) * v[0] + 2.0 * (xy - wz) * v[1] +
          2.0 * (xz + wy) * v[2],
      2.0 * (xy + wz) * v[0] + (ww - xx + yy - zz) * v[1] +
          2.0 * (yz - wx) * v[2],
      2.0 * (xz - wy) * v[0] + 2.0 * (yz + wx) * v[1] +
          (ww - xx - yy + zz) * v[2],
  };
}

Quaternion hamilton(const Quaternion& a, const Quaternion& b) {
  return {
      a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
      a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
      a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
      a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
  };
}

Quaternion pure(const Vec3& v) { return {0.0, v[0], v[1], v[2]}; }

Quaternion quat_from_axis_angle(const Vec3& axis, double angle) {
  double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] +
                       axis[2] * axis[2]);
  if (n == 0.0) return {1.0, 0.0, 0.0, 0.0};
  double h = 0.5 * angle;
  double s = std::sin(h) / n;
  return {std::cos(h), axis[0] * s, axis[1] * s, axis[2] * s};
}

Quaternion quat_from_euler(double pitch, double roll, double yaw) {
  Quaternion qz = quat_from_axis_angle({0.0, 0.0, 1.0}, yaw);
  Quaternion qy = quat_from_axis_angle({0.0, 1.0, 0.0}, pitch);
  Quaternion qx = quat_from_axis_angle({1.0, 0.0, 0.0}, roll);
  return hamilton(hamilton(qz, qy), qx);
}

EulerAngles quat_to_euler(const Quaternion& q) {
  // R[2][0] = 2(xz - wy); pitch = asin(-R[2][0]).
  double s = 2.0 * (q.w * q.y - q.x * q.z);
  s = std::clamp(s, -1.0, 1.0);
  double pitch = std::asin(s);
  double roll = std::atan2(2.0 * (q.y * q.z + q.w * q.x),
                           1.0 - 2.0 * (q.x * q.x + q.y * q.y));
  return {pitch, roll};
}

std::optional<EulerAngles> accel_to_angles(const Vec3& accel,
                                           double min_norm) {
  double n = std::sqrt(accel[0] * accel[0] + accel[1] * accel[1] +
                       accel[2] * accel[2]);
  if (!(n > min_norm)) return std::nullopt;
  EulerAngles e;
  e.roll = std::atan2(accel[1], accel[2]);
  e.pitch = std::atan2(-accel[0],
                       std::sqrt(accel[1] * accel[1] + accel[2] * accel[2]));
  return e;
}

Vec3 gravity_in_body(double pitch, double roll) {
  return {-kGravity * std::sin(pitch),
          kGravity * std::sin(roll) * std::cos(pitch),
          kGravity * std::cos(roll) * std::cos(pitch)};
}

}  // namespace natt
