#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "natt/estimator.hpp"
#include "natt/imu.hpp"
#include "natt/network.hpp"

namespace natt {

// Summary of pooled absolute attitude errors in degrees. Pitch and roll
// errors pool into one population; SD is the population (1/N) form and the
// even-count median averages the two middle values.
struct ErrorStats {
  double mean_deg = 0.0;
  double median_deg = 0.0;
  double sd_deg = 0.0;
  std::size_t count = 0;
};

ErrorStats stats_from(std::vector<double> abs_errors_deg);

// |est - truth| per axis per timestep, in degrees (2 entries per step).
std::vector<double> abs_errors_deg(std::span<const EulerAngles> est,
                                   std::span<const EulerAngles> truth);

ErrorStats angle_error_stats(std::span<const EulerAngles> est,
                             std::span<const EulerAngles> truth);

struct SequenceEval {
  std::string sequence;
  ErrorStats stats;
};

struct EvaluationReport {
  std::string estimator;
  std::vector<SequenceEval> per_sequence;
  ErrorStats pooled;
};

// Runs the estimator over every sequence (parallel across sequences,
// reduced in order) and pools the errors.
EvaluationReport evaluate(const AttitudeEstimator& estimator,
                          const std::vector<Sequence>& seqs,
                          bool known_initial);

// CSV: sequence,mean_deg,median_deg,sd_deg,count with a final ALL row.
void write_evaluation_report(const std::filesystem::path& path,
                             const EvaluationReport& report);

// Long format for distribution plots: sequence,t,axis,abs_error_deg.
void write_errors_long(const std::filesystem::path& path,
                       const std::vector<Sequence>& seqs,
                       const std::vector<std::vector<EulerAngles>>& estimates);

// --- spiking statistics ---------------------------------------------------

struct SpikeActivity {
  std::vector<double> enc_rate;  // firing fraction per neuron
  std::vector<double> hid_rate;
  std::size_t total_steps = 0;
};

// Firing fraction per neuron across all sequences (spike count over total
// timesteps; equals the sample-weighted mean of per-sequence rates).
SpikeActivity spike_activity(const NetworkParams& params,
                             const std::vector<Sequence>& seqs);

// CSV: layer,neuron,rate.
void write_spike_activity(const std::filesystem::path& path,
                          const SpikeActivity& activity);

struct AblationRow {
  double threshold = 0.0;
  std::size_t kept_enc = 0, kept_hid = 0;
  std::size_t total_enc = 0, total_hid = 0;
  double mean_deg = 0.0;
  bool valid = false;  // false when the threshold empties a layer
};

// Prune at each threshold (activity measured on calib) and re-evaluate on
// eval_seqs.
std::vector<AblationRow> ablation_sweep(const NetworkParams& params,
                                        const std::vector<Sequence>& calib,
                                        const std::vector<Sequence>& eval_seqs,
                                        const std::vector<double>& thresholds);

void write_ablation_report(const std::filesystem::path& path,
                           const std::vector<AblationRow>& rows);

// --- input manipulation ----------------------------------------------------

enum class InputMode { kNormal, kZeroGyro, kZeroAccel, kGravityAccel };

std::string to_string(InputMode mode);
InputMode input_mode_from_string(const std::string& name);

// Substitutes raw channels before normalization: zeroed gyro, zeroed accel,
// or accel pinned to the level gravity vector (0, 0, g).
Sequence apply_input_mode(const Sequence& seq, InputMode mode);

struct InputModeRow {
  InputMode mode = InputMode::kNormal;
  ErrorStats stats;
};

std::vector<InputModeRow> input_manipulation_study(
    const NetworkParams& params, const std::vector<Sequence>& seqs,
    const std::vector<InputMode>& modes);

void write_input_mode_report(const std::filesystem::path& path,
                             const std::vector<InputModeRow>& rows);

// --- model cost -------------------------------------------------------------

enum class FlopModel { kAttSnn, kGruReference };

// Multiply-accumulate count per timestep for a hidden width M fed by N
// encoder units: SNN M^2 + M N + 2M; GRU baseline 3 (M^2 + M N + M).
double flop_count(FlopModel model, std::size_t m, std::size_t n);

// --- k-fold protocol --------------------------------------------------------

struct SourceGroup {
  std::string name;  // e.g. "sim", "px4"
  std::vector<Sequence> seqs;
};

using TrainerFn = std::function<std::shared_ptr<AttitudeEstimator>(
    const std::vector<Sequence>& train, const std::vector<Sequence>& val,
    std::uint64_t seed)>;

struct FoldResult {
  std::string fold;
  std::vector<std::string> train_names, val_names, test_names;
  ErrorStats train_stats, test_stats;
};

// k shuffled 70/20/10 folds over the pooled groups plus, for every ordered
// pair of groups, a cross-source fold trained on one source and tested on
// the other.
std::vector<FoldResult> kfold_protocol(const std::vector<SourceGroup>& groups,
                                       std::size_t k, const TrainerFn& trainer,
                                       std::uint64_t seed);

void write_kfold_report(const std::filesystem::path& path,
                        const std::vector<FoldResult>& folds);

// --- initial-offset study ----------------------------------------------------

// Last time the error trace leaves the +/- threshold band: smallest t* such
// that max(|pitch err|, |roll err|) < threshold for every t >= t*. Zero if
// never outside; infinity if still outside at the end.
double time_to_threshold(std::span<const EulerAngles> est,
                         std::span<const EulerAngles> truth, double dt,
                         double threshold_deg);

struct OffsetStudyRow {
  std::string estimator;
  double time_to_threshold_s = 0.0;
  std::vector<EulerAngles> trace;
};

// Runs every estimator from the uninformed initial state over one sequence.
std::vector<OffsetStudyRow> initial_offset_study(
    const std::vector<const AttitudeEstimator*>& estimators,
    const Sequence& seq, double threshold_deg = 1.0);

}  // namespace natt
