#include "natt/pso.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "natt/common.hpp"
#include "natt/dataset_io.hpp"
#include "natt/parallel.hpp"
#include "natt/training.hpp"

namespace natt {

PsoResult pso_minimize(const CostFn& cost, std::size_t dim,
                       const PsoConfig& cfg, std::uint64_t seed,
                       const std::vector<double>* initial_guess) {
  if (dim == 0) throw ValidationError("pso: zero-dimensional search space");
  if (cfg.particles == 0 || cfg.max_iters == 0)
    throw ValidationError("pso: need at least one particle and iteration");
  std::vector<double> lo = cfg.lower, hi = cfg.upper;
  if (lo.empty()) lo.assign(dim, 0.0);
  if (hi.empty()) hi.assign(dim, 1.0);
  if (lo.size() != dim || hi.size() != dim)
    throw ValidationError("pso: bound dimension mismatch");
  for (std::size_t d = 0; d < dim; ++d)
    if (!(lo[d] < hi[d])) throw ValidationError("pso: lower >= upper bound");
  if (initial_guess && initial_guess->size() != dim)
    throw ValidationError("pso: initial guess dimension mismatch");

  const std::size_t P = cfg.particles;
  const double inf = std::numeric_limits<double>::infinity();

  auto penalized = [&](std::span<const double> x) {
    double raw = cost(x);
    double total = std::isfinite(raw) ? raw : inf;
    for (std::size_t d = 0; d < dim; ++d)
      if (x[d] < lo[d] || x[d] > hi[d]) total += cfg.penalty;
    return total;
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> pos(P, std::vector<double>(dim));
  std::vector<std::vector<double>> vel(P, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < P; ++i)
    for (std::size_t d = 0; d < dim; ++d)
      pos[i][d] = lo[d] + unit(rng) * (hi[d] - lo[d]);
  if (initial_guess) {
    for (std::size_t d = 0; d < dim; ++d)
      pos[0][d] = std::clamp((*initial_guess)[d], lo[d], hi[d]);
  }

  std::vector<double> costs(P);
  parallel_for(P, [&](std::size_t i) { costs[i] = penalized(pos[i]); });

  std::vector<std::vector<double>> pbest = pos;
  std::vector<double> pbest_cost = costs;
  std::size_t gi = 0;
  for (std::size_t i = 1; i < P; ++i)
    if (pbest_cost[i] < pbest_cost[gi]) gi = i;
  std::vector<double> gbest = pbest[gi];
  double gbest_cost = pbest_cost[gi];

  PsoResult res;
  res.history.push_back({0, gbest_cost, gbest});

  std::size_t stale = 0;
  std::vector<double> r1(dim), r2(dim);
  for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
    for (std::size_t i = 0; i < P; ++i) {
      for (std::size_t d = 0; d < dim; ++d) r1[d] = unit(rng);
      for (std::size_t d = 0; d < dim; ++d) r2[d] = unit(rng);
      for (std::size_t d = 0; d < dim; ++d) {
        vel[i][d] = cfg.inertia * vel[i][d] +
                    cfg.c1 * r1[d] * (pbest[i][d] - pos[i][d]) +
                    cfg.c2 * r2[d] * (gbest[d] - pos[i][d]);
        pos[i][d] += vel[i][d];
      }
    }
    parallel_for(P, [&](std::size_t i) { costs[i] = penalized(pos[i]); });
    double prev_best = gbest_cost;
    for (std::size_t i = 0; i < P; ++i) {
      if (costs[i] < pbest_cost[i]) {
        pbest_cost[i] = costs[i];
        pbest[i] = pos[i];
      }
      if (costs[i] < gbest_cost) {
        gbest_cost = costs[i];
        gbest = pos[i];
      }
    }
    res.history.push_back({iter, gbest_cost, gbest});
    if (prev_best - gbest_cost > cfg.stagnation_eps) {
      stale = 0;
    } else if (++stale >= cfg.stagnation_iters) {
      break;
    }
  }

  for (std::size_t d = 0; d < dim; ++d)
    gbest[d] = std::clamp(gbest[d], lo[d], hi[d]);
  res.best = gbest;
  res.best_cost = gbest_cost;
  return res;
}

std::size_t tuning_dim(FilterKind kind) {
  switch (kind) {
    case FilterKind::kComplementary: return 1;
    case FilterKind::kMahony: return 2;
    case FilterKind::kMadgwick: return 1;
    case FilterKind::kEkf: return 2;
  }
  throw ValidationError("unknown filter kind");
}

FilterParams map_box_to_filter(FilterKind kind, bool adaptive,
                               std::span<const double> x) {
  if (x.size() != tuning_dim(kind))
    throw ValidationError("map_box_to_filter: dimension mismatch");
  auto decade = [](double u) { return std::pow(10.0, -6.0 + 8.0 * u); };
  switch (kind) {
    case FilterKind::kComplementary: {
      ComplementaryParams p;
      p.gamma = x[0];
      p.adaptive = adaptive;
      return p;
    }
    case FilterKind::kMahony: {
      MahonyParams p;
      p.k_p = 10.0 * x[0];
      p.k_i = x[1];
      return p;
    }
    case FilterKind::kMadgwick: {
      MadgwickParams p;
      p.beta = x[0];
      return p;
    }
    case FilterKind::kEkf: {
      EkfParams p;
      p.gyro_noise = decade(x[0]);
      p.accel_noise = decade(x[1]);
      return p;
    }
  }
  throw ValidationError("unknown filter kind");
}

namespace {

std::vector<double> box_image_of_defaults(FilterKind kind, bool adaptive) {
  FilterParams def = default_filter_params(kind, adaptive);
  switch (kind) {
    case FilterKind::kComplementary:
      return {std::get<ComplementaryParams>(def).gamma};
    case FilterKind::kMahony: {
      const auto& p = std::get<MahonyParams>(def);
      return {p.k_p / 10.0, p.k_i};
    }
    case FilterKind::kMadgwick:
      return {std::get<MadgwickParams>(def).beta};
    case FilterKind::kEkf: {
      const auto& p = std::get<EkfParams>(def);
      auto inv = [](double v) { return (std::log10(v) + 6.0) / 8.0; };
      return {inv(p.gyro_noise), inv(p.accel_noise)};
    }
  }
  throw ValidationError("unknown filter kind");
}

std::vector<double> native_values(FilterKind kind,
                                  std::span<const double> box) {
  // Parameter columns of the tuning report, in declaration order.
  FilterParams p = map_box_to_filter(kind, false, box);
  switch (kind) {
    case FilterKind::kComplementary:
      return {std::get<ComplementaryParams>(p).gamma};
    case FilterKind::kMahony: {
      const auto& m = std::get<MahonyParams>(p);
      return {m.k_p, m.k_i};
    }
    case FilterKind::kMadgwick:
      return {std::get<MadgwickParams>(p).beta};
    case FilterKind::kEkf: {
      const auto& e = std::get<EkfParams>(p);
      return {e.gyro_noise, e.accel_noise};
    }
  }
  throw ValidationError("unknown filter kind");
}

}  // namespace

TuneResult tune_filter(FilterKind kind, bool adaptive,
                       const std::vector<Sequence>& data, const PsoConfig& cfg,
                       std::uint64_t seed) {
  if (data.empty()) throw ValidationError("tune_filter: empty dataset");
  const std::size_t dim = tuning_dim(kind);

  CostFn cost = [&](std::span<const double> x) -> double {
    FilterParams params = map_box_to_filter(kind, adaptive, x);
    double total = 0.0;
    for (const auto& seq : data) {
      try {
        auto est = run_filter(kind, params, seq, false);
        total += per_step_mse(est, seq.truth);
      } catch (const std::exception&) {
        return std::numeric_limits<double>::infinity();
      }
    }
    return total / static_cast<double>(data.size());
  };

  std::vector<double> guess = box_image_of_defaults(kind, adaptive);
  TuneResult result;
  result.kind = kind;
  result.adaptive = adaptive;
  result.pso = pso_minimize(cost, dim, cfg, seed, &guess);
  result.params = map_box_to_filter(kind, adaptive, result.pso.best);
  return result;
}

void write_tuning_report(const std::filesystem::path& path,
                         const TuneResult& result) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write tuning report: " + path.string());
  const std::size_t dim = tuning_dim(result.kind);
  out << "iter,gbest_cost";
  for (std::size_t d = 0; d < dim; ++d) out << ",param_" << d;
  out << '\n';
  for (const auto& row : result.pso.history) {
    out << row.iter << ',' << format_double(row.gbest_cost);
    auto natives = native_values(result.kind, row.gbest);
    for (double v : natives) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace natt
