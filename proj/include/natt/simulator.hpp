#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "natt/angles.hpp"
#include "natt/common.hpp"
#include "natt/dataset_io.hpp"
#include "natt/imu.hpp"

namespace natt {

// Synthetic quadrotor flight: a smooth random attitude program, exact
// kinematic body rates, and a quasi-static thrust/drag translational model
// that makes the accelerometer read gravity plus maneuver-induced
// disturbance instead of an implausibly clean gravity vector.
struct TrajectoryConfig {
  double duration = 10.0;  // s
  double rate = 200.0;     // Hz
  double max_tilt = deg_to_rad(30.0);
  double max_yaw = deg_to_rad(20.0);
  double f_min = 0.05;  // Hz, attitude program band
  double f_max = 2.0;
  std::size_t components = 6;  // sinusoids per axis
  double ramp_time = 1.5;      // s, smooth start envelope
  double drag_k = 0.45;        // 1/s, linear drag coefficient

  void validate() const;
};

// One axis of the program: dc + sum of sinusoids, all scaled so the peak
// magnitude stays below the axis limit.
struct AxisProgram {
  double dc = 0.0;
  std::vector<double> amp, freq_hz, phase;
};

// C^2 attitude program (quintic ramp envelope times a trigonometric
// polynomial) with analytic time derivatives.
struct AttitudeProgram {
  AxisProgram pitch, roll, yaw;
  double ramp_time = 0.0;

  void angles(double t, double& pitch_v, double& roll_v, double& yaw_v) const;
  void euler_rates(double t, double& dpitch, double& droll,
                   double& dyaw) const;
  // ZYX Euler-rate to body-rate map evaluated on the analytic derivatives.
  [[nodiscard]] Vec3 body_rates(double t) const;
};

AttitudeProgram make_program(const TrajectoryConfig& cfg, std::uint64_t seed);
// Constant-attitude program (hover at a fixed tilt), no ramp.
AttitudeProgram make_constant_program(double pitch, double roll);

struct TruthTraces {
  double dt = 0.005;
  std::vector<double> t;
  std::vector<EulerAngles> euler;
  std::vector<double> yaw;
  std::vector<Vec3> body_rate;        // rad/s, noise-free gyro
  std::vector<Vec3> specific_force;   // m/s^2, noise-free accel reading
};

// Integrates the translational dynamics (RK4 on the linear-drag velocity
// ODE) and samples all truth channels. The world velocity starts at the
// terminal velocity of the initial attitude, so constant-attitude programs
// have no startup transient and the accelerometer reads the exact tilt from
// the first sample.
TruthTraces simulate_truth(const AttitudeProgram& program,
                           const TrajectoryConfig& cfg);

struct SensorModel {
  double gyro_noise_density = 0.003;  // rad/s/sqrt(Hz)
  double accel_noise_density = 0.02;  // m/s^2/sqrt(Hz)
  Vec3 gyro_bias{0.0, 0.0, 0.0};      // rad/s, constant per run
  Vec3 accel_bias{0.0, 0.0, 0.0};     // m/s^2, constant per run
  std::uint64_t seed = 0;

  [[nodiscard]] std::string to_json() const;
};

// Corrupts the truth channels with the per-run biases plus white noise of
// standard deviation density * sqrt(rate) per sample.
Sequence synthesize_imu(const TruthTraces& truth, const SensorModel& model,
                        const std::string& name);

// Additional bias / noise applied on top of an existing sequence; ground
// truth is left untouched.
struct AugmentDeltas {
  Vec3 gyro_bias{0.0, 0.0, 0.0};
  Vec3 accel_bias{0.0, 0.0, 0.0};
  double gyro_noise_density = 0.0;
  double accel_noise_density = 0.0;
};

Sequence augment(const Sequence& seq, const AugmentDeltas& deltas,
                 std::uint64_t seed);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Disjoint shuffled 70/20/10 split (round-to-nearest on the first two).
SplitIndices split_dataset(std::size_t n, std::uint64_t seed,
                           double train_frac = 0.7, double val_frac = 0.2);

// Dataset generator used by the CLI: n sequences, a trailing fraction of
// which hold a constant random tilt; per-sequence seeds and biases derive
// from the master seed.
struct DatasetConfig {
  TrajectoryConfig traj;
  std::size_t n = 30;
  double constant_fraction = 0.2;
  double gyro_noise_density = 0.003;
  double accel_noise_density = 0.02;
  double gyro_bias_sd = 0.01;  // rad/s
  double accel_bias_sd = 0.2;  // m/s^2
};

struct GeneratedDataset {
  std::vector<Sequence> sequences;
  DatasetManifest manifest;
};

GeneratedDataset make_dataset(const DatasetConfig& cfg, std::uint64_t seed);

}  // namespace natt
