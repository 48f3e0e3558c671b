#include "natt/filters.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "natt/common.hpp"
#include "natt/dataset_io.hpp"

namespace natt {

namespace {

double vec_norm(const Vec3& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

Quaternion integrate_gyro(const Quaternion& q, const Vec3& omega, double dt) {
  Quaternion dq = hamilton(q, pure(omega));
  Quaternion out{q.w + 0.5 * dt * dq.w, q.x + 0.5 * dt * dq.x,
                 q.y + 0.5 * dt * dq.y, q.z + 0.5 * dt * dq.z};
  return out.normalized();
}

// Predicted gravity direction in the body frame, h(q) = R^T(q) e_z.
Vec3 gravity_direction(const Quaternion& q) {
  return {2.0 * (q.x * q.z - q.w * q.y), 2.0 * (q.y * q.z + q.w * q.x),
          q.w * q.w - q.x * q.x - q.y * q.y + q.z * q.z};
}

}  // namespace

void complementary_step(ComplementaryState& st, const ComplementaryParams& p,
                        const ImuSample& s, double dt) {
  // Pitch integrates the y body rate, roll the x body rate.
  double pitch_pred = st.angles.pitch + s.gyro[1] * dt;
  double roll_pred = st.angles.roll + s.gyro[0] * dt;

  auto acc = accel_to_angles(s.accel, kAccelMinNorm);
  if (!acc) {
    st.angles = {pitch_pred, roll_pred};
    return;
  }

  double gp = p.gamma, gr = p.gamma;
  if (p.adaptive && vec_norm(s.gyro) < p.gate) {
    gp = std::clamp(p.gamma - p.k_a * std::abs(pitch_pred - acc->pitch), 0.0,
                    p.gamma);
    gr = std::clamp(p.gamma - p.k_a * std::abs(roll_pred - acc->roll), 0.0,
                    p.gamma);
  }
  st.angles.pitch = gp * pitch_pred + (1.0 - gp) * acc->pitch;
  st.angles.roll = gr * roll_pred + (1.0 - gr) * acc->roll;
}

void mahony_step(MahonyState& st, const MahonyParams& p, const ImuSample& s,
                 double dt) {
  Vec3 omega{s.gyro[0] - st.bias[0], s.gyro[1] - st.bias[1],
             s.gyro[2] - st.bias[2]};
  double an = vec_norm(s.accel);
  if (an > kAccelMinNorm) {
    Vec3 v_meas{s.accel[0] / an, s.accel[1] / an, s.accel[2] / an};
    Vec3 v_pred = gravity_direction(st.q);
    Vec3 e = cross(v_meas, v_pred);
    for (int k = 0; k < 3; ++k) {
      omega[k] += p.k_p * e[k];
      st.bias[k] -= p.k_i * e[k] * dt;
    }
  }
  st.q = integrate_gyro(st.q, omega, dt);
}

void madgwick_step(MadgwickState& st, const MadgwickParams& p,
                   const ImuSample& s, double dt) {
  const Quaternion& q = st.q;
  Quaternion dq = hamilton(q, pure(s.gyro));
  double qdot[4] = {0.5 * dq.w, 0.5 * dq.x, 0.5 * dq.y, 0.5 * dq.z};

  double an = vec_norm(s.accel);
  if (an > kAccelMinNorm) {
    Vec3 a{s.accel[0] / an, s.accel[1] / an, s.accel[2] / an};
    Vec3 h = gravity_direction(q);
    double f[3] = {h[0] - a[0], h[1] - a[1], h[2] - a[2]};
    // Rows of the objective Jacobian d h / d (w,x,y,z).
    double J[3][4] = {{-2.0 * q.y, 2.0 * q.z, -2.0 * q.w, 2.0 * q.x},
                      {2.0 * q.x, 2.0 * q.w, 2.0 * q.z, 2.0 * q.y},
                      {2.0 * q.w, -2.0 * q.x, -2.0 * q.y, 2.0 * q.z}};
    double grad[4];
    for (int c = 0; c < 4; ++c)
      grad[c] = 0.5 * (J[0][c] * f[0] + J[1][c] * f[1] + J[2][c] * f[2]);
    double gn = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] +
                          grad[2] * grad[2] + grad[3] * grad[3]);
    if (gn >= 1e-12) {
      for (int c = 0; c < 4; ++c) qdot[c] -= p.beta * grad[c] / gn;
    }
  }

  Quaternion out{q.w + qdot[0] * dt, q.x + qdot[1] * dt, q.y + qdot[2] * dt,
                 q.z + qdot[3] * dt};
  st.q = out.normalized();
}

EkfState EkfState::init(const Quaternion& q0, double var) {
  EkfState st;
  st.q = q0;
  st.P.fill(0.0);
  for (int d = 0; d < 4; ++d) st.P[d * 4 + d] = var;
  return st;
}

void ekf_step(EkfState& st, const EkfParams& p, const ImuSample& s, double dt) {
  // Predict: q <- (I + dt/2 M(omega)) q, first-order integration of
  // qdot = 1/2 q (x) (0, omega).
  const double hx = 0.5 * dt * s.gyro[0];
  const double hy = 0.5 * dt * s.gyro[1];
  const double hz = 0.5 * dt * s.gyro[2];
  const double F[4][4] = {{1.0, -hx, -hy, -hz},
                          {hx, 1.0, hz, -hy},
                          {hy, -hz, 1.0, hx},
                          {hz, hy, -hx, 1.0}};
  double qv[4] = {st.q.w, st.q.x, st.q.y, st.q.z};
  double qn[4];
  for (int r = 0; r < 4; ++r) {
    qn[r] = F[r][0] * qv[0] + F[r][1] * qv[1] + F[r][2] * qv[2] +
            F[r][3] * qv[3];
  }
  Quaternion qpred{qn[0], qn[1], qn[2], qn[3]};
  qpred = qpred.normalized();

  double FP[4][4];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      FP[r][c] = F[r][0] * st.P[0 * 4 + c] + F[r][1] * st.P[1 * 4 + c] +
                 F[r][2] * st.P[2 * 4 + c] + F[r][3] * st.P[3 * 4 + c];
    }
  double Pp[4][4];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      Pp[r][c] = FP[r][0] * F[c][0] + FP[r][1] * F[c][1] + FP[r][2] * F[c][2] +
                 FP[r][3] * F[c][3];
    }
  const double qproc = p.gyro_noise * dt;
  for (int d = 0; d < 4; ++d) Pp[d][d] += qproc;

  auto store = [&](const Quaternion& q, const double P[4][4]) {
    st.q = q;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) st.P[r * 4 + c] = P[r][c];
  };

  double an = vec_norm(s.accel);
  if (!(an > kAccelMinNorm)) {
    store(qpred, Pp);
    return;
  }

  Vec3 z{s.accel[0] / an, s.accel[1] / an, s.accel[2] / an};
  Vec3 h = gravity_direction(qpred);
  const Quaternion& q = qpred;
  double H[3][4] = {{-2.0 * q.y, 2.0 * q.z, -2.0 * q.w, 2.0 * q.x},
                    {2.0 * q.x, 2.0 * q.w, 2.0 * q.z, 2.0 * q.y},
                    {2.0 * q.w, -2.0 * q.x, -2.0 * q.y, 2.0 * q.z}};

  double PHt[4][3];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) {
      PHt[r][c] = Pp[r][0] * H[c][0] + Pp[r][1] * H[c][1] + Pp[r][2] * H[c][2] +
                  Pp[r][3] * H[c][3];
    }
  double S[3][3];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      S[r][c] = H[r][0] * PHt[0][c] + H[r][1] * PHt[1][c] +
                H[r][2] * PHt[2][c] + H[r][3] * PHt[3][c];
    }
  for (int d = 0; d < 3; ++d) S[d][d] += p.accel_noise;

  double det = S[0][0] * (S[1][1] * S[2][2] - S[1][2] * S[2][1]) -
               S[0][1] * (S[1][0] * S[2][2] - S[1][2] * S[2][0]) +
               S[0][2] * (S[1][0] * S[2][1] - S[1][1] * S[2][0]);
  if (!std::isfinite(det) || std::abs(det) < 1e-300) {
    // Innovation covariance not invertible: keep the prediction and inflate
    // the covariance so the filter does not lock up.
    for (int d = 0; d < 4; ++d) Pp[d][d] += qproc;
    store(qpred, Pp);
    return;
  }
  double inv_det = 1.0 / det;
  double Si[3][3] = {
      {(S[1][1] * S[2][2] - S[1][2] * S[2][1]) * inv_det,
       (S[0][2] * S[2][1] - S[0][1] * S[2][2]) * inv_det,
       (S[0][1] * S[1][2] - S[0][2] * S[1][1]) * inv_det},
      {(S[1][2] * S[2][0] - S[1][0] * S[2][2]) * inv_det,
       (S[0][0] * S[2][2] - S[0][2] * S[2][0]) * inv_det,
       (S[0][2] * S[1][0] - S[0][0] * S[1][2]) * inv_det},
      {(S[1][0] * S[2][1] - S[1][1] * S[2][0]) * inv_det,
       (S[0][1] * S[2][0] - S[0][0] * S[2][1]) * inv_det,
       (S[0][0] * S[1][1] - S[0][1] * S[1][0]) * inv_det}};

  double K[4][3];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 3; ++c) {
      K[r][c] = PHt[r][0] * Si[0][c] + PHt[r][1] * Si[1][c] +
                PHt[r][2] * Si[2][c];
    }

  double innov[3] = {z[0] - h[0], z[1] - h[1], z[2] - h[2]};
  double dq[4];
  for (int r = 0; r < 4; ++r)
    dq[r] = K[r][0] * innov[0] + K[r][1] * innov[1] + K[r][2] * innov[2];
  Quaternion qupd{qpred.w + dq[0], qpred.x + dq[1], qpred.y + dq[2],
                  qpred.z + dq[3]};
  qupd = qupd.normalized();

  // Joseph-form covariance update keeps P symmetric positive semidefinite.
  double A[4][4];  // I - K H
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      double kh = K[r][0] * H[0][c] + K[r][1] * H[1][c] + K[r][2] * H[2][c];
      A[r][c] = (r == c ? 1.0 : 0.0) - kh;
    }
  double AP[4][4];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      AP[r][c] = A[r][0] * Pp[0][c] + A[r][1] * Pp[1][c] + A[r][2] * Pp[2][c] +
                 A[r][3] * Pp[3][c];
    }
  double Pn[4][4];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      Pn[r][c] = AP[r][0] * A[c][0] + AP[r][1] * A[c][1] + AP[r][2] * A[c][2] +
                 AP[r][3] * A[c][3];
      Pn[r][c] += p.accel_noise * (K[r][0] * K[c][0] + K[r][1] * K[c][1] +
                                   K[r][2] * K[c][2]);
    }
  for (int r = 0; r < 4; ++r)
    for (int c = r + 1; c < 4; ++c) {
      double m = 0.5 * (Pn[r][c] + Pn[c][r]);
      Pn[r][c] = m;
      Pn[c][r] = m;
    }
  store(qupd, Pn);
}

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kComplementary: return "complementary";
    case FilterKind::kMahony: return "mahony";
    case FilterKind::kMadgwick: return "madgwick";
    case FilterKind::kEkf: return "ekf";
  }
  return "?";
}

FilterKind filter_kind_from_string(const std::string& name) {
  if (name == "complementary" || name == "adaptive") return FilterKind::kComplementary;
  if (name == "mahony") return FilterKind::kMahony;
  if (name == "madgwick") return FilterKind::kMadgwick;
  if (name == "ekf") return FilterKind::kEkf;
  throw ValidationError("unknown filter kind: " + name);
}

FilterParams default_filter_params(FilterKind kind, bool adaptive) {
  switch (kind) {
    case FilterKind::kComplementary: {
      ComplementaryParams p;
      p.adaptive = adaptive;
      return p;
    }
    case FilterKind::kMahony: return MahonyParams{};
    case FilterKind::kMadgwick: return MadgwickParams{};
    case FilterKind::kEkf: return EkfParams{};
  }
  throw ValidationError("unknown filter kind");
}

std::vector<EulerAngles> run_filter(FilterKind kind, const FilterParams& params,
                                    const Sequence& seq, bool known_initial) {
  if (seq.samples.empty()) throw ValidationError("run_filter: empty sequence");
  if (known_initial && seq.truth.size() != seq.samples.size())
    throw ValidationError("run_filter: missing ground truth for known start");
  const double dt = seq.dt;
  std::vector<EulerAngles> out(seq.samples.size());

  EulerAngles init0 = known_initial ? seq.truth.front() : EulerAngles{};
  Quaternion q0 = known_initial ? quat_from_euler(init0.pitch, init0.roll)
                                : Quaternion{};

  switch (kind) {
    case FilterKind::kComplementary: {
      const auto& p = std::get<ComplementaryParams>(params);
      ComplementaryState st{init0};
      for (std::size_t t = 0; t < seq.samples.size(); ++t) {
        complementary_step(st, p, seq.samples[t], dt);
        out[t] = st.angles;
      }
      break;
    }
    case FilterKind::kMahony: {
      const auto& p = std::get<MahonyParams>(params);
      MahonyState st;
      st.q = q0;
      for (std::size_t t = 0; t < seq.samples.size(); ++t) {
        mahony_step(st, p, seq.samples[t], dt);
        out[t] = quat_to_euler(st.q);
      }
      break;
    }
    case FilterKind::kMadgwick: {
      const auto& p = std::get<MadgwickParams>(params);
      MadgwickState st;
      st.q = q0;
      for (std::size_t t = 0; t < seq.samples.size(); ++t) {
        madgwick_step(st, p, seq.samples[t], dt);
        out[t] = quat_to_euler(st.q);
      }
      break;
    }
    case FilterKind::kEkf: {
      const auto& p = std::get<EkfParams>(params);
      EkfState st = EkfState::init(q0, p.init_var);
      for (std::size_t t = 0; t < seq.samples.size(); ++t) {
        ekf_step(st, p, seq.samples[t], dt);
        out[t] = quat_to_euler(st.q);
      }
      break;
    }
  }
  return out;
}

void save_filter_params(const std::filesystem::path& path, FilterKind kind,
                        const FilterParams& params) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write filter parameters: " + path.string());
  out << "filter=" << to_string(kind) << '\n';
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ComplementaryParams>) {
          out << "gamma=" << format_double(p.gamma) << '\n'
              << "adaptive=" << (p.adaptive ? 1 : 0) << '\n'
              << "gate=" << format_double(p.gate) << '\n'
              << "k_a=" << format_double(p.k_a) << '\n';
        } else if constexpr (std::is_same_v<T, MahonyParams>) {
          out << "k_p=" << format_double(p.k_p) << '\n'
              << "k_i=" << format_double(p.k_i) << '\n';
        } else if constexpr (std::is_same_v<T, MadgwickParams>) {
          out << "beta=" << format_double(p.beta) << '\n';
        } else {
          out << "gyro_noise=" << format_double(p.gyro_noise) << '\n'
              << "accel_noise=" << format_double(p.accel_noise) << '\n'
              << "init_var=" << format_double(p.init_var) << '\n';
        }
      },
      params);
}

std::pair<FilterKind, FilterParams> load_filter_params(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing filter parameter file: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto it = kv.find("filter");
  if (it == kv.end())
    throw FormatError(path.string() + ": missing 'filter' key");
  FilterKind kind;
  try {
    kind = filter_kind_from_string(it->second);
  } catch (const ValidationError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  kv.erase(it);

  auto num = [&](const std::string& key, double fallback) {
    auto f = kv.find(key);
    if (f == kv.end()) return fallback;
    char* end = nullptr;
    double v = std::strtod(f->second.c_str(), &end);
    if (end == f->second.c_str() || *end != '\0')
      throw FormatError(path.string() + ": bad value for " + key);
    kv.erase(f);
    return v;
  };

  FilterParams params = default_filter_params(kind);
  switch (kind) {
    case FilterKind::kComplementary: {
      ComplementaryParams p;
      p.gamma = num("gamma", p.gamma);
      p.adaptive = num("adaptive", p.adaptive ? 1.0 : 0.0) != 0.0;
      p.gate = num("gate", p.gate);
      p.k_a = num("k_a", p.k_a);
      params = p;
      break;
    }
    case FilterKind::kMahony: {
      MahonyParams p;
      p.k_p = num("k_p", p.k_p);
      p.k_i = num("k_i", p.k_i);
      params = p;
      break;
    }
    case FilterKind::kMadgwick: {
      MadgwickParams p;
      p.beta = num("beta", p.beta);
      params = p;
      break;
    }
    case FilterKind::kEkf: {
      EkfParams p;
      p.gyro_noise = num("gyro_noise", p.gyro_noise);
      p.accel_noise = num("accel_noise", p.accel_noise);
      p.init_var = num("init_var", p.init_var);
      params = p;
      break;
    }
  }
  if (!kv.empty())
    throw FormatError(path.string() + ": unknown key '" + kv.begin()->first +
                      "'");
  return {kind, params};
}

}  // namespace natt
