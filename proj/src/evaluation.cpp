#include "natt/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "natt/common.hpp"
#include "natt/dataset_io.hpp"
#include "natt/parallel.hpp"
#include "natt/simulator.hpp"

namespace natt {

ErrorStats stats_from(std::vector<double> e) {
  if (e.empty()) throw ValidationError("stats_from: empty error set");
  ErrorStats s;
  s.count = e.size();
  double sum = 0.0;
  for (double x : e) sum += x;
  s.mean_deg = sum / static_cast<double>(e.size());
  double acc = 0.0;
  for (double x : e) acc += (x - s.mean_deg) * (x - s.mean_deg);
  s.sd_deg = std::sqrt(acc / static_cast<double>(e.size()));
  std::size_t mid = e.size() / 2;
  std::nth_element(e.begin(), e.begin() + mid, e.end());
  double hi = e[mid];
  if (e.size() % 2 == 0) {
    double lo = *std::max_element(e.begin(), e.begin() + mid);
    s.median_deg = 0.5 * (lo + hi);
  } else {
    s.median_deg = hi;
  }
  return s;
}

std::vector<double> abs_errors_deg(std::span<const EulerAngles> est,
                                   std::span<const EulerAngles> truth) {
  if (est.size() != truth.size())
    throw ValidationError("abs_errors_deg: length mismatch");
  std::vector<double> e;
  e.reserve(2 * est.size());
  for (std::size_t t = 0; t < est.size(); ++t) {
    e.push_back(rad_to_deg(std::abs(est[t].pitch - truth[t].pitch)));
    e.push_back(rad_to_deg(std::abs(est[t].roll - truth[t].roll)));
  }
  return e;
}

ErrorStats angle_error_stats(std::span<const EulerAngles> est,
                             std::span<const EulerAngles> truth) {
  return stats_from(abs_errors_deg(est, truth));
}

EvaluationReport evaluate(const AttitudeEstimator& estimator,
                          const std::vector<Sequence>& seqs,
                          bool known_initial) {
  if (seqs.empty()) throw ValidationError("evaluate: empty dataset");
  std::vector<std::vector<EulerAngles>> traces(seqs.size());
  parallel_for(seqs.size(), [&](std::size_t i) {
    traces[i] = estimator.estimate(seqs[i], known_initial);
  });
  EvaluationReport rep;
  rep.estimator = estimator.name();
  std::vector<double> pooled;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto errs = abs_errors_deg(traces[i], seqs[i].truth);
    rep.per_sequence.push_back({seqs[i].name, stats_from(errs)});
    pooled.insert(pooled.end(), errs.begin(), errs.end());
  }
  rep.pooled = stats_from(std::move(pooled));
  return rep;
}

namespace {

void write_stats_row(std::ofstream& out, const std::string& name,
                     const ErrorStats& s) {
  out << name << ',' << format_double(s.mean_deg) << ','
      << format_double(s.median_deg) << ',' << format_double(s.sd_deg) << ','
      << s.count << '\n';
}

}  // namespace

void write_evaluation_report(const std::filesystem::path& path,
                             const EvaluationReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path.string());
  out << "sequence,mean_deg,median_deg,sd_deg,count\n";
  for (const auto& row : report.per_sequence)
    write_stats_row(out, row.sequence, row.stats);
  write_stats_row(out, "ALL", report.pooled);
}

void write_errors_long(const std::filesystem::path& path,
                       const std::vector<Sequence>& seqs,
                       const std::vector<std::vector<EulerAngles>>& estimates) {
  if (estimates.size() != seqs.size())
    throw ValidationError("write_errors_long: trace count mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write long errors: " + path.string());
  out << "sequence,t,axis,abs_error_deg\n";
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto& est = estimates[i];
    const auto& seq = seqs[i];
    if (est.size() != seq.samples.size())
      throw ValidationError("write_errors_long: trace length mismatch");
    for (std::size_t t = 0; t < est.size(); ++t) {
      double ep = rad_to_deg(std::abs(est[t].pitch - seq.truth[t].pitch));
      double er = rad_to_deg(std::abs(est[t].roll - seq.truth[t].roll));
      out << seq.name << ',' << format_double(seq.samples[t].t)
          << ",pitch," << format_double(ep) << '\n';
      out << seq.name << ',' << format_double(seq.samples[t].t) << ",roll,"
          << format_double(er) << '\n';
    }
  }
}

SpikeActivity spike_activity(const NetworkParams& params,
                             const std::vector<Sequence>& seqs) {
  if (seqs.empty()) throw ValidationError("spike_activity: empty dataset");
  auto results = batch_forward(params, seqs);
  SpikeActivity act;
  act.enc_rate.assign(params.n_enc, 0.0);
  act.hid_rate.assign(params.n_hid, 0.0);
  for (const auto& r : results) {
    act.total_steps += r.enc_spikes.size();
    for (const auto& sv : r.enc_spikes)
      for (std::size_t i = 0; i < sv.size(); ++i) act.enc_rate[i] += sv[i];
    for (const auto& sv : r.hid_spikes)
      for (std::size_t i = 0; i < sv.size(); ++i) act.hid_rate[i] += sv[i];
  }
  if (act.total_steps == 0)
    throw ValidationError("spike_activity: no timesteps");
  for (double& v : act.enc_rate) v /= static_cast<double>(act.total_steps);
  for (double& v : act.hid_rate) v /= static_cast<double>(act.total_steps);
  return act;
}

void write_spike_activity(const std::filesystem::path& path,
                          const SpikeActivity& activity) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write spike activity: " + path.string());
  out << "layer,neuron,rate\n";
  for (std::size_t i = 0; i < activity.enc_rate.size(); ++i)
    out << "encoder," << i << ',' << format_double(activity.enc_rate[i])
        << '\n';
  for (std::size_t i = 0; i < activity.hid_rate.size(); ++i)
    out << "hidden," << i << ',' << format_double(activity.hid_rate[i])
        << '\n';
}

std::vector<AblationRow> ablation_sweep(const NetworkParams& params,
                                        const std::vector<Sequence>& calib,
                                        const std::vector<Sequence>& eval_seqs,
                                        const std::vector<double>& thresholds) {
  SpikeActivity act = spike_activity(params, calib);
  std::vector<AblationRow> rows;
  for (double thr : thresholds) {
    AblationRow row;
    row.threshold = thr;
    row.total_enc = params.n_enc;
    row.total_hid = params.n_hid;
    try {
      NetworkParams pruned = prune(params, act.enc_rate, act.hid_rate, thr);
      row.kept_enc = pruned.n_enc;
      row.kept_hid = pruned.n_hid;
      SnnEstimator est(pruned);
      row.mean_deg = evaluate(est, eval_seqs, false).pooled.mean_deg;
      row.valid = true;
    } catch (const ValidationError&) {
      row.valid = false;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_ablation_report(const std::filesystem::path& path,
                           const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write ablation report: " + path.string());
  out << "threshold,kept_enc,total_enc,kept_hid,total_hid,mean_deg,valid\n";
  for (const auto& r : rows) {
    out << format_double(r.threshold) << ',' << r.kept_enc << ','
        << r.total_enc << ',' << r.kept_hid << ',' << r.total_hid << ','
        << (r.valid ? format_double(r.mean_deg) : std::string("nan")) << ','
        << (r.valid ? 1 : 0) << '\n';
  }
}

std::string to_string(InputMode mode) {
  switch (mode) {
    case InputMode::kNormal: return "normal";
    case InputMode::kZeroGyro: return "zero_gyro";
    case InputMode::kZeroAccel: return "zero_accel";
    case InputMode::kGravityAccel: return "gravity_accel";
  }
  return "?";
}

InputMode input_mode_from_string(const std::string& name) {
  if (name == "normal") return InputMode::kNormal;
  if (name == "zero_gyro") return InputMode::kZeroGyro;
  if (name == "zero_accel") return InputMode::kZeroAccel;
  if (name == "gravity_accel") return InputMode::kGravityAccel;
  throw ValidationError("unknown input mode: " + name);
}

Sequence apply_input_mode(const Sequence& seq, InputMode mode) {
  Sequence out = seq;
  switch (mode) {
    case InputMode::kNormal:
      break;
    case InputMode::kZeroGyro:
      for (auto& s : out.samples) s.gyro = {0.0, 0.0, 0.0};
      break;
    case InputMode::kZeroAccel:
      for (auto& s : out.samples) s.accel = {0.0, 0.0, 0.0};
      break;
    case InputMode::kGravityAccel:
      for (auto& s : out.samples) s.accel = {0.0, 0.0, kGravity};
      break;
  }
  return out;
}

std::vector<InputModeRow> input_manipulation_study(
    const NetworkParams& params, const std::vector<Sequence>& seqs,
    const std::vector<InputMode>& modes) {
  std::vector<InputModeRow> rows;
  SnnEstimator est(params);
  for (InputMode mode : modes) {
    std::vector<Sequence> modified;
    modified.reserve(seqs.size());
    for (const auto& s : seqs) modified.push_back(apply_input_mode(s, mode));
    InputModeRow row;
    row.mode = mode;
    row.stats = evaluate(est, modified, false).pooled;
    rows.push_back(row);
  }
  return rows;
}

void write_input_mode_report(const std::filesystem::path& path,
                             const std::vector<InputModeRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write input-mode report: " + path.string());
  out << "mode,mean_deg,median_deg,sd_deg,count\n";
  for (const auto& r : rows) write_stats_row(out, to_string(r.mode), r.stats);
}

double flop_count(FlopModel model, std::size_t m, std::size_t n) {
  double M = static_cast<double>(m), N = static_cast<double>(n);
  switch (model) {
    case FlopModel::kAttSnn:
      return M * M + M * N + 2.0 * M;
    case FlopModel::kGruReference:
      return 3.0 * (M * M + M * N + M);
  }
  throw ValidationError("unknown flop model");
}

std::vector<FoldResult> kfold_protocol(const std::vector<SourceGroup>& groups,
                                       std::size_t k, const TrainerFn& trainer,
                                       std::uint64_t seed) {
  if (groups.empty()) throw ValidationError("kfold: no source groups");
  std::vector<Sequence> pool;
  for (const auto& g : groups)
    pool.insert(pool.end(), g.seqs.begin(), g.seqs.end());
  if (pool.empty()) throw ValidationError("kfold: empty dataset");

  auto eval_stats = [](const AttitudeEstimator& est,
                       const std::vector<Sequence>& seqs) {
    return evaluate(est, seqs, false).pooled;
  };
  auto names_of = [](const std::vector<Sequence>& seqs) {
    std::vector<std::string> names;
    for (const auto& s : seqs) names.push_back(s.name);
    return names;
  };

  std::vector<FoldResult> folds;
  for (std::size_t f = 0; f < k; ++f) {
    SplitIndices idx = split_dataset(pool.size(), seed + f);
    std::vector<Sequence> train, val, test;
    for (auto i : idx.train) train.push_back(pool[i]);
    for (auto i : idx.val) val.push_back(pool[i]);
    for (auto i : idx.test) test.push_back(pool[i]);
    if (val.empty()) val = train;
    if (test.empty()) test = val;
    auto est = trainer(train, val, seed + f);
    FoldResult fr;
    fr.fold = "fold_" + std::to_string(f);
    fr.train_names = names_of(train);
    fr.val_names = names_of(val);
    fr.test_names = names_of(test);
    fr.train_stats = eval_stats(*est, train);
    fr.test_stats = eval_stats(*est, test);
    folds.push_back(std::move(fr));
  }

  // Cross-source folds: train on one source, test on another.
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = 0; b < groups.size(); ++b) {
      if (a == b || groups[a].seqs.empty() || groups[b].seqs.empty()) continue;
      SplitIndices idx = split_dataset(groups[a].seqs.size(), seed + k + a,
                                       0.8, 0.2);
      std::vector<Sequence> train, val;
      for (auto i : idx.train) train.push_back(groups[a].seqs[i]);
      for (auto i : idx.val) val.push_back(groups[a].seqs[i]);
      if (val.empty()) val = train;
      auto est = trainer(train, val, seed + k + a * groups.size() + b);
      FoldResult fr;
      fr.fold = "cross_" + groups[a].name + "_to_" + groups[b].name;
      fr.train_names = names_of(train);
      fr.val_names = names_of(val);
      fr.test_names = names_of(groups[b].seqs);
      fr.train_stats = eval_stats(*est, train);
      fr.test_stats = eval_stats(*est, groups[b].seqs);
      folds.push_back(std::move(fr));
    }
  }
  return folds;
}

void write_kfold_report(const std::filesystem::path& path,
                        const std::vector<FoldResult>& folds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write kfold report: " + path.string());
  out << "fold,train_mean_deg,train_sd_deg,test_mean_deg,test_sd_deg,"
         "n_train,n_test\n";
  for (const auto& f : folds) {
    out << f.fold << ',' << format_double(f.train_stats.mean_deg) << ','
        << format_double(f.train_stats.sd_deg) << ','
        << format_double(f.test_stats.mean_deg) << ','
        << format_double(f.test_stats.sd_deg) << ',' << f.train_names.size()
        << ',' << f.test_names.size() << '\n';
  }
}

double time_to_threshold(std::span<const EulerAngles> est,
                         std::span<const EulerAngles> truth, double dt,
                         double threshold_deg) {
  if (est.size() != truth.size() || est.empty())
    throw ValidationError("time_to_threshold: bad trace");
  const double thr = deg_to_rad(threshold_deg);
  std::ptrdiff_t last_bad = -1;
  for (std::size_t t = 0; t < est.size(); ++t) {
    double e = std::max(std::abs(est[t].pitch - truth[t].pitch),
                        std::abs(est[t].roll - truth[t].roll));
    if (e >= thr) last_bad = static_cast<std::ptrdiff_t>(t);
  }
  if (last_bad < 0) return 0.0;
  if (last_bad == static_cast<std::ptrdiff_t>(est.size()) - 1)
    return std::numeric_limits<double>::infinity();
  return static_cast<double>(last_bad + 1) * dt;
}

std::vector<OffsetStudyRow> initial_offset_study(
    const std::vector<const AttitudeEstimator*>& estimators,
    const Sequence& seq, double threshold_deg) {
  if (estimators.empty())
    throw ValidationError("initial_offset_study: no estimators");
  std::vector<OffsetStudyRow> rows(estimators.size());
  parallel_for(estimators.size(), [&](std::size_t i) {
    OffsetStudyRow row;
    row.estimator = estimators[i]->name();
    row.trace = estimators[i]->estimate(seq, false);
    row.time_to_threshold_s =
        time_to_threshold(row.trace, seq.truth, seq.dt, threshold_deg);
    rows[i] = std::move(row);
  });
  return rows;
}

}  // namespace natt
