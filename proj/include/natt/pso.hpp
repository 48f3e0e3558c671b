#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "natt/filters.hpp"
#include "natt/imu.hpp"

namespace natt {

struct PsoConfig {
  std::size_t particles = 100;
  std::size_t max_iters = 300;
  double inertia = 0.8;
  double c1 = 0.15;  // cognitive (personal best) weight
  double c2 = 0.05;  // social (global best) weight
  double penalty = 10.0;  // added per dimension outside the box
  double stagnation_eps = 1e-9;
  std::size_t stagnation_iters = 50;
  // Per-dimension box; empty means [0, 1]^d.
  std::vector<double> lower, upper;
};

struct PsoIterRow {
  std::size_t iter = 0;
  double gbest_cost = 0.0;
  std::vector<double> gbest;
};

struct PsoResult {
  std::vector<double> best;  // clamped into the box
  double best_cost = 0.0;
  std::vector<PsoIterRow> history;  // one row per iteration, iter 0 = init
};

using CostFn = std::function<double(std::span<const double>)>;

// Synchronous global-best PSO. Velocities start at zero; positions are
// uniform over the box except that initial_guess (if given) replaces
// particle 0. Costs evaluate in parallel across particles; random draws and
// best updates stay sequential, so results are seed-deterministic. A
// non-finite cost counts as +inf rather than aborting. Stops after
// stagnation_iters iterations without the global best improving by more
// than stagnation_eps, or at max_iters.
PsoResult pso_minimize(const CostFn& cost, std::size_t dim,
                       const PsoConfig& cfg, std::uint64_t seed,
                       const std::vector<double>* initial_guess = nullptr);

struct TuneResult {
  FilterKind kind = FilterKind::kComplementary;
  bool adaptive = false;
  FilterParams params;   // mapped from the best box position
  PsoResult pso;
};

// Maps a point in the PSO unit box to native filter parameters:
//   complementary  gamma = x0
//   mahony         k_p = 10 x0, k_i = x1
//   madgwick       beta = x0
//   ekf            gyro/accel noise = 10^(-6 + 8 x), decades 1e-6..1e2
FilterParams map_box_to_filter(FilterKind kind, bool adaptive,
                               std::span<const double> x);
std::size_t tuning_dim(FilterKind kind);

// PSO over the filter's box with cost = mean per-timestep MSE across the
// given sequences, each run from the uninformed initial state. Particle 0
// starts at the default parameters, so the tuned result can never be worse
// than the defaults on the tuning data.
TuneResult tune_filter(FilterKind kind, bool adaptive,
                       const std::vector<Sequence>& data, const PsoConfig& cfg,
                       std::uint64_t seed);

// CSV: iter,gbest_cost,param_0..param_{d-1} (native parameter values).
void write_tuning_report(const std::filesystem::path& path,
                         const TuneResult& result);

}  // namespace natt
