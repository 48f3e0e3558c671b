#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "natt/angles.hpp"
#include "natt/imu.hpp"

namespace natt {

// Per-axis complementary filter: blend of the gyro-propagated angle and the
// accelerometer tilt. gamma = 1 degenerates to pure gyro integration. The
// adaptive variant lowers gamma in near-static phases (gyro norm below
// `gate`) proportionally to the disagreement with the accelerometer.
struct ComplementaryParams {
  double gamma = 0.98;
  bool adaptive = false;
  double gate = 0.1;  // rad/s
  double k_a = 0.01;  // gamma reduction per radian of disagreement
};

struct MahonyParams {
  double k_p = 0.5;
  double k_i = 0.05;
};

struct MadgwickParams {
  double beta = 0.05;
};

// Quaternion-state EKF with a gravity-direction measurement. Noise values
// are variances: gyro_noise scales the per-step process noise, accel_noise
// the measurement noise of the unit gravity vector.
struct EkfParams {
  double gyro_noise = 1e-4;
  double accel_noise = 1e-1;
  double init_var = 0.5;
};

struct ComplementaryState {
  EulerAngles angles;
};

struct MahonyState {
  Quaternion q;
  Vec3 bias{0.0, 0.0, 0.0};
};

struct MadgwickState {
  Quaternion q;
};

struct EkfState {
  Quaternion q;
  std::array<double, 16> P{};  // 4x4 row-major

  static EkfState init(const Quaternion& q0, double var);
};

// Accelerometer readings with norm <= this are treated as uninformative and
// the step falls back to pure gyro propagation.
inline constexpr double kAccelMinNorm = 0.1;

void complementary_step(ComplementaryState& st, const ComplementaryParams& p,
                        const ImuSample& s, double dt);
void mahony_step(MahonyState& st, const MahonyParams& p, const ImuSample& s,
                 double dt);
void madgwick_step(MadgwickState& st, const MadgwickParams& p,
                   const ImuSample& s, double dt);
void ekf_step(EkfState& st, const EkfParams& p, const ImuSample& s, double dt);

enum class FilterKind { kComplementary, kMahony, kMadgwick, kEkf };

using FilterParams =
    std::variant<ComplementaryParams, MahonyParams, MadgwickParams, EkfParams>;

std::string to_string(FilterKind kind);
FilterKind filter_kind_from_string(const std::string& name);
FilterParams default_filter_params(FilterKind kind, bool adaptive = false);

// Runs the filter over a whole sequence. The estimate at index t has
// consumed samples 0..t. known_initial seeds the state with truth[0]; the
// uninformed start is level attitude (identity quaternion).
std::vector<EulerAngles> run_filter(FilterKind kind, const FilterParams& params,
                                    const Sequence& seq, bool known_initial);

// Flat key=value parameter files with a `filter=<kind>` line.
void save_filter_params(const std::filesystem::path& path, FilterKind kind,
                        const FilterParams& params);
std::pair<FilterKind, FilterParams> load_filter_params(
    const std::filesystem::path& path);

}  // namespace natt
