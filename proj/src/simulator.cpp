#include "natt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

namespace natt {

namespace {

// Quintic smootherstep: C^2 at both ends.
double ramp(double t, double ramp_time) {
  if (ramp_time <= 0.0 || t >= ramp_time) return 1.0;
  if (t <= 0.0) return 0.0;
  double u = t / ramp_time;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

double ramp_deriv(double t, double ramp_time) {
  if (ramp_time <= 0.0 || t >= ramp_time || t <= 0.0) return 0.0;
  double u = t / ramp_time;
  return (30.0 * u * u * (1.0 + u * (-2.0 + u))) / ramp_time;
}

double axis_value(const AxisProgram& a, double t) {
  double s = a.dc;
  for (std::size_t k = 0; k < a.amp.size(); ++k)
    s += a.amp[k] * std::sin(2.0 * kPi * a.freq_hz[k] * t + a.phase[k]);
  return s;
}

double axis_deriv(const AxisProgram& a, double t) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.amp.size(); ++k) {
    double w = 2.0 * kPi * a.freq_hz[k];
    s += a.amp[k] * w * std::cos(w * t + a.phase[k]);
  }
  return s;
}

}  // namespace

void TrajectoryConfig::validate() const {
  if (!(duration > 0.0) || !(rate > 0.0))
    throw ValidationError("trajectory: duration and rate must be positive");
  if (!(max_tilt > 0.0) || max_tilt >= deg_to_rad(85.0))
    throw ValidationError("trajectory: max tilt must be in (0, 85) degrees");
  if (!(f_min > 0.0) || !(f_max > f_min))
    throw ValidationError("trajectory: need 0 < f_min < f_max");
  if (!(drag_k > 0.0))
    throw ValidationError("trajectory: drag coefficient must be positive");
}

void AttitudeProgram::angles(double t, double& pitch_v, double& roll_v,
                             double& yaw_v) const {
  double r = ramp(t, ramp_time);
  pitch_v = r * axis_value(pitch, t);
  roll_v = r * axis_value(roll, t);
  yaw_v = r * axis_value(yaw, t);
}

void AttitudeProgram::euler_rates(double t, double& dpitch, double& droll,
                                  double& dyaw) const {
  double r = ramp(t, ramp_time);
  double dr = ramp_deriv(t, ramp_time);
  dpitch = dr * axis_value(pitch, t) + r * axis_deriv(pitch, t);
  droll = dr * axis_value(roll, t) + r * axis_deriv(roll, t);
  dyaw = dr * axis_value(yaw, t) + r * axis_deriv(yaw, t);
}

Vec3 AttitudeProgram::body_rates(double t) const {
  double th, ph, ps;
  angles(t, th, ph, ps);
  double dth, dph, dps;
  euler_rates(t, dth, dph, dps);
  double sth = std::sin(th), cth = std::cos(th);
  double sph = std::sin(ph), cph = std::cos(ph);
  return {dph - dps * sth,
          dth * cph + dps * cth * sph,
          -dth * sph + dps * cth * cph};
}

AttitudeProgram make_program(const TrajectoryConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto make_axis = [&](double limit) {
    AxisProgram a;
    a.dc = (2.0 * unit(rng) - 1.0) * 0.35;
    const double f_ref = 0.3;
    double weight_sum = std::abs(a.dc);
    for (std::size_t k = 0; k < cfg.components; ++k) {
      double f = std::exp(std::log(cfg.f_min) +
                          unit(rng) * (std::log(cfg.f_max) - std::log(cfg.f_min)));
      double amp = (0.2 + 0.8 * unit(rng)) * f_ref / (f_ref + f);
      a.freq_hz.push_back(f);
      a.phase.push_back(unit(rng) * 2.0 * kPi);
      a.amp.push_back(amp);
      weight_sum += amp;
    }
    // Normalize so |dc| + sum(amp) hits a random fraction of the limit;
    // the peak magnitude can then never exceed the limit.
    double target = limit * (0.55 + 0.4 * unit(rng));
    double scale = weight_sum > 0.0 ? target / weight_sum : 0.0;
    a.dc *= scale;
    for (double& v : a.amp) v *= scale;
    return a;
  };

  AttitudeProgram prog;
  prog.pitch = make_axis(cfg.max_tilt);
  prog.roll = make_axis(cfg.max_tilt);
  prog.yaw = make_axis(cfg.max_yaw);
  prog.ramp_time = cfg.ramp_time;
  return prog;
}

AttitudeProgram make_constant_program(double pitch, double roll) {
  AttitudeProgram prog;
  prog.pitch.dc = pitch;
  prog.roll.dc = roll;
  prog.ramp_time = 0.0;
  return prog;
}

TruthTraces simulate_truth(const AttitudeProgram& program,
                           const TrajectoryConfig& cfg) {
  cfg.validate();
  const double dt = 1.0 / cfg.rate;
  const std::size_t n =
      static_cast<std::size_t>(std::llround(cfg.duration * cfg.rate));
  if (n == 0) throw ValidationError("trajectory too short for one sample");

  // World acceleration demanded by attitude + quasi-static thrust, before
  // drag: thrust cancels gravity along body z when level and scales with
  // 1/(cos pitch cos roll) to keep height quasi-constant while tilted.
  auto applied_accel = [&](double t) -> Vec3 {
    double th, ph, ps;
    program.angles(t, th, ph, ps);
    Quaternion q = quat_from_euler(th, ph, ps);
    double ctc = std::cos(th) * std::cos(ph);
    double tm = kGravity / std::max(ctc, 0.05);  // thrust/mass
    Vec3 r3 = q.rotate({0.0, 0.0, 1.0});
    return {-tm * r3[0], -tm * r3[1], -tm * r3[2] + kGravity};
  };
  auto vdot = [&](double t, const Vec3& v) -> Vec3 {
    Vec3 a = applied_accel(t);
    return {a[0] - cfg.drag_k * v[0], a[1] - cfg.drag_k * v[1],
            a[2] - cfg.drag_k * v[2]};
  };

  TruthTraces tr;
  tr.dt = dt;
  tr.t.reserve(n);
  tr.euler.reserve(n);
  tr.yaw.reserve(n);
  tr.body_rate.reserve(n);
  tr.specific_force.reserve(n);

  // Terminal velocity of the initial attitude: zero world acceleration at
  // t = 0, so static programs read the exact tilt immediately.
  Vec3 a0 = applied_accel(0.0);
  Vec3 v{a0[0] / cfg.drag_k, a0[1] / cfg.drag_k, a0[2] / cfg.drag_k};

  for (std::size_t k = 0; k < n; ++k) {
    double t = static_cast<double>(k) * dt;
    double th, ph, ps;
    program.angles(t, th, ph, ps);
    Quaternion q = quat_from_euler(th, ph, ps);

    Vec3 a_world = vdot(t, v);
    Vec3 g_minus_a{-a_world[0], -a_world[1], kGravity - a_world[2]};
    Vec3 f = q.conjugate().rotate(g_minus_a);

    tr.t.push_back(t);
    tr.euler.push_back({th, ph});
    tr.yaw.push_back(ps);
    tr.body_rate.push_back(program.body_rates(t));
    tr.specific_force.push_back(f);

    // RK4 step for the velocity state.
    Vec3 k1 = a_world;
    Vec3 v2{v[0] + 0.5 * dt * k1[0], v[1] + 0.5 * dt * k1[1],
            v[2] + 0.5 * dt * k1[2]};
    Vec3 k2 = vdot(t + 0.5 * dt, v2);
    Vec3 v3{v[0] + 0.5 * dt * k2[0], v[1] + 0.5 * dt * k2[1],
            v[2] + 0.5 * dt * k2[2]};
    Vec3 k3 = vdot(t + 0.5 * dt, v3);
    Vec3 v4{v[0] + dt * k3[0], v[1] + dt * k3[1], v[2] + dt * k3[2]};
    Vec3 k4 = vdot(t + dt, v4);
    for (int d = 0; d < 3; ++d)
      v[d] += dt / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
  }
  return tr;
}

std::string SensorModel::to_json() const {
  nlohmann::json j;
  j["gyro_noise_density"] = gyro_noise_density;
  j["accel_noise_density"] = accel_noise_density;
  j["gyro_bias"] = gyro_bias;
  j["accel_bias"] = accel_bias;
  j["seed"] = seed;
  return j.dump();
}

Sequence synthesize_imu(const TruthTraces& truth, const SensorModel& model,
                        const std::string& name) {
  if (truth.t.empty()) throw ValidationError("synthesize_imu: empty truth");
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rate = 1.0 / truth.dt;
  const double sg = model.gyro_noise_density * std::sqrt(rate);
  const double sa = model.accel_noise_density * std::sqrt(rate);

  Sequence seq;
  seq.name = name;
  seq.dt = truth.dt;
  seq.samples.reserve(truth.t.size());
  seq.truth = truth.euler;
  for (std::size_t k = 0; k < truth.t.size(); ++k) {
    ImuSample s;
    s.t = truth.t[k];
    for (int d = 0; d < 3; ++d)
      s.gyro[d] = truth.body_rate[k][d] + model.gyro_bias[d] + sg * gauss(rng);
    for (int d = 0; d < 3; ++d)
      s.accel[d] =
          truth.specific_force[k][d] + model.accel_bias[d] + sa * gauss(rng);
    seq.samples.push_back(s);
  }
  return seq;
}

Sequence augment(const Sequence& seq, const AugmentDeltas& deltas,
                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rate = seq.rate();
  const double sg = deltas.gyro_noise_density * std::sqrt(rate);
  const double sa = deltas.accel_noise_density * std::sqrt(rate);
  Sequence out = seq;
  for (auto& s : out.samples) {
    for (int d = 0; d < 3; ++d) {
      s.gyro[d] += deltas.gyro_bias[d];
      if (sg > 0.0) s.gyro[d] += sg * gauss(rng);
    }
    for (int d = 0; d < 3; ++d) {
      s.accel[d] += deltas.accel_bias[d];
      if (sa > 0.0) s.accel[d] += sa * gauss(rng);
    }
  }
  return out;
}

SplitIndices split_dataset(std::size_t n, std::uint64_t seed,
                           double train_frac, double val_frac) {
  if (n == 0) throw ValidationError("split_dataset: empty dataset");
  if (!(train_frac > 0.0) || !(val_frac >= 0.0) ||
      train_frac + val_frac > 1.0)
    throw ValidationError("split_dataset: invalid fractions");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(train_frac * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n);
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_frac * static_cast<double>(n)));
  n_val = std::min(n_val, n - n_train);
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + n_train);
  s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  s.test.assign(idx.begin() + n_train + n_val, idx.end());
  return s;
}

GeneratedDataset make_dataset(const DatasetConfig& cfg, std::uint64_t seed) {
  cfg.traj.validate();
  if (cfg.n == 0) throw ValidationError("make_dataset: n must be positive");
  std::mt19937_64 master(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::size_t n_const = static_cast<std::size_t>(
      std::llround(cfg.constant_fraction * static_cast<double>(cfg.n)));
  n_const = std::min(n_const, cfg.n);

  GeneratedDataset ds;
  ds.manifest.rate_hz = cfg.traj.rate;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    bool constant = i >= cfg.n - n_const;
    std::uint64_t traj_seed = master();
    SensorModel model;
    model.gyro_noise_density = cfg.gyro_noise_density;
    model.accel_noise_density = cfg.accel_noise_density;
    for (int d = 0; d < 3; ++d) model.gyro_bias[d] = cfg.gyro_bias_sd * gauss(master);
    for (int d = 0; d < 3; ++d) model.accel_bias[d] = cfg.accel_bias_sd * gauss(master);
    model.seed = master();

    AttitudeProgram prog;
    if (constant) {
      double pitch = (2.0 * unit(master) - 1.0) * 0.7 * cfg.traj.max_tilt;
      double roll = (2.0 * unit(master) - 1.0) * 0.7 * cfg.traj.max_tilt;
      prog = make_constant_program(pitch, roll);
    } else {
      prog = make_program(cfg.traj, traj_seed);
    }
    TruthTraces truth = simulate_truth(prog, cfg.traj);

    char buf[32];
    std::snprintf(buf, sizeof(buf), "seq_%03zu", i);
    Sequence seq = synthesize_imu(truth, model, buf);
    ds.sequences.push_back(std::move(seq));

    ManifestEntry entry;
    entry.file = std::string(buf) + ".csv";
    entry.seed = traj_seed;
    entry.kind = constant ? "constant" : "maneuver";
    entry.sensor_json = model.to_json();
    ds.manifest.entries.push_back(entry);
  }
  return ds;
}

}  // namespace natt
