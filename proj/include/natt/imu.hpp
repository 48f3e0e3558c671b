#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "natt/angles.hpp"

namespace natt {

// One 6-DOF IMU reading. Gyro in rad/s, accelerometer specific force in
// m/s^2, both in the body frame (x-forward, y-right, z-down).
struct ImuSample {
  double t = 0.0;
  Vec3 gyro{0.0, 0.0, 0.0};
  Vec3 accel{0.0, 0.0, 0.0};
};

// A uniformly sampled flight segment with per-sample attitude ground truth.
struct Sequence {
  std::string name;
  double dt = 0.005;
  std::vector<ImuSample> samples;
  std::vector<EulerAngles> truth;  // same length as samples

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double rate() const { return dt > 0.0 ? 1.0 / dt : 0.0; }
};

// Per-channel affine map onto [-1, 1]: x_norm = 2 (x - min) / (max - min) - 1.
// Values outside [min, max] are NOT clamped; they map outside [-1, 1].
// Channel order: gx, gy, gz, ax, ay, az.
struct NormalizationSpec {
  std::array<double, 6> min{-34.9, -34.9, -34.9, -156.9, -156.9, -156.9};
  std::array<double, 6> max{34.9, 34.9, 34.9, 156.9, 156.9, 156.9};

  // Throws ValidationError unless min < max on every channel.
  void validate() const;
};

std::array<double, 6> normalize(const ImuSample& s,
                                const NormalizationSpec& spec);

// Symmetric ranges covering the data: per channel, max = -min =
// margin * max |x| over all samples (floored at a small epsilon so constant
// channels stay valid).
NormalizationSpec fit_normalization(const std::vector<Sequence>& seqs,
                                    double margin = 1.1);

}  // namespace natt
