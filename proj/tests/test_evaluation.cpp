#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <vector>

#include <doctest.h>

#include "natt/common.hpp"
#include "natt/evaluation.hpp"
#include "natt/simulator.hpp"
#include "support/temp_dir.hpp"

using namespace natt;
using testutil::TempDir;

namespace {

// Estimator that replays the ground truth; pooled errors must be zero.
class TruthEstimator final : public AttitudeEstimator {
 public:
  [[nodiscard]] std::string name() const override { return "truth"; }
  [[nodiscard]] std::vector<EulerAngles> estimate(
      const Sequence& seq, bool) const override {
    return seq.truth;
  }
};

// Estimator with a fixed answer, handy for crafted error traces.
class ConstantEstimator final : public AttitudeEstimator {
 public:
  explicit ConstantEstimator(EulerAngles value) : value_(value) {}
  [[nodiscard]] std::string name() const override { return "constant"; }
  [[nodiscard]] std::vector<EulerAngles> estimate(
      const Sequence& seq, bool) const override {
    return std::vector<EulerAngles>(seq.size(), value_);
  }

 private:
  EulerAngles value_;
};

Sequence small_sequence(std::size_t steps, std::uint64_t seed,
                        const std::string& name) {
  TrajectoryConfig cfg;
  cfg.duration = steps / cfg.rate;
  AttitudeProgram prog = make_program(cfg, seed);
  TruthTraces truth = simulate_truth(prog, cfg);
  SensorModel m;
  m.seed = seed;
  return synthesize_imu(truth, m, name);
}

}  // namespace

TEST_CASE("stats_from hand values") {
  ErrorStats s = stats_from({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean_deg == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(s.median_deg == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(s.sd_deg == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
  CHECK(s.count == 4);

  ErrorStats odd = stats_from({10.0, 1.0, 2.0});
  CHECK(odd.median_deg == 2.0);
  CHECK(odd.mean_deg == doctest::Approx(13.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(stats_from({}), ValidationError);
}

TEST_CASE("abs_errors_deg pools pitch and roll per step") {
  std::vector<EulerAngles> est{{0.1, 0.0}, {0.0, -0.2}};
  std::vector<EulerAngles> truth{{0.0, 0.0}, {0.0, 0.0}};
  auto errs = abs_errors_deg(est, truth);
  REQUIRE(errs.size() == 4);
  CHECK(errs[0] == doctest::Approx(rad_to_deg(0.1)).epsilon(1e-12));
  CHECK(errs[1] == 0.0);
  CHECK(errs[2] == 0.0);
  CHECK(errs[3] == doctest::Approx(rad_to_deg(0.2)).epsilon(1e-12));

  ErrorStats s = angle_error_stats(est, truth);
  CHECK(s.count == 4);
  CHECK(s.mean_deg ==
        doctest::Approx((rad_to_deg(0.1) + rad_to_deg(0.2)) / 4.0)
            .epsilon(1e-12));
}

TEST_CASE("evaluate pools every sequence") {
  std::vector<Sequence> seqs{small_sequence(100, 1, "a"),
                             small_sequence(150, 2, "b")};
  TruthEstimator perfect;
  EvaluationReport rep = evaluate(perfect, seqs, false);
  CHECK(rep.estimator == "truth");
  REQUIRE(rep.per_sequence.size() == 2);
  CHECK(rep.per_sequence[0].sequence == "a");
  CHECK(rep.pooled.count == 2 * (seqs[0].size() + seqs[1].size()));
  CHECK(rep.pooled.mean_deg == 0.0);
  CHECK(rep.pooled.sd_deg == 0.0);

  CHECK_THROWS_AS(evaluate(perfect, {}, false), ValidationError);
}

TEST_CASE("evaluation report file carries an ALL row") {
  TempDir dir("report");
  std::vector<Sequence> seqs{small_sequence(60, 3, "x")};
  ConstantEstimator est({0.0, 0.0});
  EvaluationReport rep = evaluate(est, seqs, false);
  auto path = dir.path() / "report.csv";
  write_evaluation_report(path, rep);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "sequence,mean_deg,median_deg,sd_deg,count");
  std::vector<std::string> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(line);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].substr(0, 2) == "x,");
  CHECK(rows[1].substr(0, 4) == "ALL,");
}

TEST_CASE("errors_long format") {
  TempDir dir("long");
  std::vector<Sequence> seqs{small_sequence(5, 4, "s")};
  std::vector<std::vector<EulerAngles>> est{
      std::vector<EulerAngles>(5, EulerAngles{0.1, 0.0})};
  auto path = dir.path() / "errors_long.csv";
  write_errors_long(path, seqs, est);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "sequence,t,axis,abs_error_deg");
  std::size_t rows = 0;
  std::size_t pitch_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    if (line.find(",pitch,") != std::string::npos) ++pitch_rows;
  }
  CHECK(rows == 10);
  CHECK(pitch_rows == 5);
}

TEST_CASE("spike_activity is the firing fraction over all steps") {
  NetworkParams p = init_network(8, 8, 5);
  std::vector<Sequence> seqs{small_sequence(50, 6, "a"),
                             small_sequence(100, 7, "b")};

  SpikeActivity act = spike_activity(p, seqs);
  CHECK(act.total_steps == 150);
  REQUIRE(act.enc_rate.size() == 8);
  REQUIRE(act.hid_rate.size() == 8);

  std::vector<double> enc_count(8, 0.0), hid_count(8, 0.0);
  for (const auto& seq : seqs) {
    ForwardResult f = forward_sequence(p, seq);
    for (const auto& s : f.enc_spikes)
      for (std::size_t j = 0; j < 8; ++j) enc_count[j] += s[j];
    for (const auto& s : f.hid_spikes)
      for (std::size_t j = 0; j < 8; ++j) hid_count[j] += s[j];
  }
  for (std::size_t j = 0; j < 8; ++j) {
    CHECK(act.enc_rate[j] == enc_count[j] / 150.0);
    CHECK(act.hid_rate[j] == hid_count[j] / 150.0);
  }

  TempDir dir("spikes");
  auto path = dir.path() / "spikes.csv";
  write_spike_activity(path, act);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "layer,neuron,rate");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 16);
}

TEST_CASE("flop_count reproduces the published cost model") {
  CHECK(flop_count(FlopModel::kAttSnn, 100, 100) == 20200.0);
  CHECK(flop_count(FlopModel::kGruReference, 100, 100) == 60300.0);
  double ratio = flop_count(FlopModel::kGruReference, 100, 100) /
                 flop_count(FlopModel::kAttSnn, 100, 100);
  CHECK(std::abs(ratio - 2.985) < 0.001);

  CHECK(flop_count(FlopModel::kAttSnn, 40, 40) == 3280.0);
  CHECK(flop_count(FlopModel::kGruReference, 40, 40) == 9720.0);
  CHECK(flop_count(FlopModel::kAttSnn, 100, 6) == 10800.0);
}

TEST_CASE("apply_input_mode substitutes raw channels") {
  Sequence seq = small_sequence(20, 8, "m");

  Sequence zg = apply_input_mode(seq, InputMode::kZeroGyro);
  Sequence za = apply_input_mode(seq, InputMode::kZeroAccel);
  Sequence ga = apply_input_mode(seq, InputMode::kGravityAccel);
  Sequence id = apply_input_mode(seq, InputMode::kNormal);

  for (std::size_t t = 0; t < seq.size(); ++t) {
    CHECK(zg.samples[t].gyro == Vec3{0.0, 0.0, 0.0});
    CHECK(zg.samples[t].accel == seq.samples[t].accel);

    CHECK(za.samples[t].accel == Vec3{0.0, 0.0, 0.0});
    CHECK(za.samples[t].gyro == seq.samples[t].gyro);

    CHECK(ga.samples[t].accel == Vec3{0.0, 0.0, kGravity});

    CHECK(id.samples[t].gyro == seq.samples[t].gyro);
    CHECK(id.samples[t].accel == seq.samples[t].accel);

    CHECK(zg.truth[t].pitch == seq.truth[t].pitch);
  }

  for (InputMode mode : {InputMode::kNormal, InputMode::kZeroGyro,
                         InputMode::kZeroAccel, InputMode::kGravityAccel}) {
    CHECK(input_mode_from_string(to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(input_mode_from_string("upside_down"), ValidationError);
}

TEST_CASE("input manipulation study matches direct evaluation") {
  NetworkParams p = init_network(6, 6, 9);
  std::vector<Sequence> seqs{small_sequence(40, 10, "a"),
                             small_sequence(40, 11, "b")};
  std::vector<InputMode> modes{InputMode::kNormal, InputMode::kZeroAccel};

  auto rows = input_manipulation_study(p, seqs, modes);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].mode == InputMode::kNormal);
  CHECK(rows[1].mode == InputMode::kZeroAccel);

  SnnEstimator est(p);
  std::vector<Sequence> zeroed;
  for (const auto& s : seqs)
    zeroed.push_back(apply_input_mode(s, InputMode::kZeroAccel));
  EvaluationReport direct = evaluate(est, zeroed, false);
  CHECK(rows[1].stats.mean_deg == direct.pooled.mean_deg);
  CHECK(rows[1].stats.count == direct.pooled.count);

  TempDir dir("modes");
  auto path = dir.path() / "input_modes.csv";
  write_input_mode_report(path, rows);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "mode,mean_deg,median_deg,sd_deg,count");
}

TEST_CASE("time_to_threshold edge cases") {
  std::vector<EulerAngles> truth(10, EulerAngles{0.0, 0.0});
  const double one_deg = deg_to_rad(1.0);

  std::vector<EulerAngles> nice(10, EulerAngles{one_deg * 0.5, 0.0});
  CHECK(time_to_threshold(nice, truth, 0.1, 1.0) == 0.0);

  // Bad through index 4, clean afterwards: converged at (4+1) * dt.
  std::vector<EulerAngles> settles = nice;
  for (int t = 0; t <= 4; ++t) settles[t].pitch = one_deg * 3.0;
  CHECK(time_to_threshold(settles, truth, 0.1, 1.0) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // Exactly at the threshold counts as outside the band.
  std::vector<EulerAngles> grazing = nice;
  grazing[2].roll = one_deg;
  CHECK(time_to_threshold(grazing, truth, 0.1, 1.0) ==
        doctest::Approx(0.3).epsilon(1e-12));

  std::vector<EulerAngles> never = nice;
  never[9].pitch = one_deg * 2.0;
  CHECK(std::isinf(time_to_threshold(never, truth, 0.1, 1.0)));

  CHECK_THROWS_AS(time_to_threshold({}, {}, 0.1, 1.0), ValidationError);
}

TEST_CASE("initial_offset_study runs uninformed estimators") {
  Sequence level = small_sequence(200, 12, "hover");
  // Overwrite with a constant level truth and exact gravity so the truth
  // estimator trivially converges at t = 0.
  for (auto& e : level.truth) e = {0.0, 0.0};

  TruthEstimator perfect;
  ConstantEstimator wrong({deg_to_rad(5.0), 0.0});
  auto rows = initial_offset_study({&perfect, &wrong}, level, 1.0);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].estimator == "truth");
  CHECK(rows[0].time_to_threshold_s == 0.0);
  CHECK(rows[0].trace.size() == level.size());
  CHECK(std::isinf(rows[1].time_to_threshold_s));
}

TEST_CASE("ablation sweep reports kept counts and validity") {
  NetworkParams p = init_network(10, 10, 13);
  std::vector<Sequence> calib{small_sequence(60, 14, "c")};
  std::vector<Sequence> eval_seqs{small_sequence(60, 15, "e")};

  auto rows = ablation_sweep(p, calib, eval_seqs, {0.0, 2.0});
  REQUIRE(rows.size() == 2);

  CHECK(rows[0].threshold == 0.0);
  CHECK(rows[0].valid);
  CHECK(rows[0].kept_enc == 10);
  CHECK(rows[0].kept_hid == 10);
  CHECK(rows[0].total_enc == 10);

  SnnEstimator est(p);
  EvaluationReport direct = evaluate(est, eval_seqs, false);
  CHECK(rows[0].mean_deg == direct.pooled.mean_deg);

  // A threshold above 1 removes every neuron: marked invalid, not fatal.
  CHECK(rows[1].threshold == 2.0);
  CHECK_FALSE(rows[1].valid);

  TempDir dir("ablation");
  auto path = dir.path() / "ablation.csv";
  write_ablation_report(path, rows);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "threshold,kept_enc,total_enc,kept_hid,total_hid,mean_deg,valid");
}

TEST_CASE("kfold protocol covers the pool and adds cross-source folds") {
  std::vector<SourceGroup> groups(2);
  groups[0].name = "sim";
  for (int k = 0; k < 6; ++k)
    groups[0].seqs.push_back(small_sequence(30, 20 + k, "sim" + std::to_string(k)));
  groups[1].name = "px4";
  for (int k = 0; k < 4; ++k)
    groups[1].seqs.push_back(small_sequence(30, 30 + k, "px4" + std::to_string(k)));

  TrainerFn trainer = [](const std::vector<Sequence>&,
                         const std::vector<Sequence>&, std::uint64_t) {
    return std::make_shared<FilterEstimator>(
        FilterKind::kComplementary,
        default_filter_params(FilterKind::kComplementary));
  };

  auto folds = kfold_protocol(groups, 2, trainer, 99);
  REQUIRE(folds.size() == 4);
  CHECK(folds[0].fold == "fold_0");
  CHECK(folds[1].fold == "fold_1");
  CHECK(folds[2].fold == "cross_sim_to_px4");
  CHECK(folds[3].fold == "cross_px4_to_sim");

  for (int f = 0; f < 2; ++f) {
    std::set<std::string> names;
    for (const auto* part :
         {&folds[f].train_names, &folds[f].val_names, &folds[f].test_names})
      for (const auto& n : *part) CHECK(names.insert(n).second);
    CHECK(names.size() == 10);
    CHECK(!folds[f].test_names.empty());
    CHECK(folds[f].test_stats.count > 0);
  }

  // Cross folds train strictly on one source and test on the whole other.
  for (const auto& n : folds[2].train_names) CHECK(n.substr(0, 3) == "sim");
  CHECK(folds[2].test_names.size() == 4);
  for (const auto& n : folds[2].test_names) CHECK(n.substr(0, 3) == "px4");

  auto again = kfold_protocol(groups, 2, trainer, 99);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    CHECK(again[f].fold == folds[f].fold);
    CHECK(again[f].train_names == folds[f].train_names);
    CHECK(again[f].test_stats.mean_deg == folds[f].test_stats.mean_deg);
  }

  TempDir dir("kfold");
  auto path = dir.path() / "kfold.csv";
  write_kfold_report(path, folds);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "fold,train_mean_deg,train_sd_deg,test_mean_deg,test_sd_deg,"
        "n_train,n_test");
  CHECK_THROWS_AS(kfold_protocol({}, 2, trainer, 1), ValidationError);
}
