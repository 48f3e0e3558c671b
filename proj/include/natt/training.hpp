#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "natt/network.hpp"

namespace natt {

// SuperSpike surrogate derivative, used in place of the Heaviside slope on
// the backward pass only: 1 / (1 + width |x|)^2 with x = v - threshold.
struct SurrogateSpec {
  double width = 20.0;
};

inline double superspike_grad(double x, const SurrogateSpec& s = {}) {
  double d = 1.0 + s.width * std::abs(x);
  return 1.0 / (d * d);
}

// Sequence loss: sum over timesteps of the two-component squared error
// halved, i.e. sum_t ((pitch_err^2 + roll_err^2) / 2).
double mse_loss(std::span<const EulerAngles> est,
                std::span<const EulerAngles> truth);

// mse_loss divided by the sequence length (logging/comparison scale).
double per_step_mse(std::span<const EulerAngles> est,
                    std::span<const EulerAngles> truth);

// Loss gradients w.r.t. the effective (forward-pass) parameters. Decay
// gradients are w.r.t. the decay values themselves; the trainer chains them
// through its sigmoid reparameterization.
struct Gradients {
  std::vector<double> enc_w, ff_w, rec_w, out_w;
  std::vector<double> enc_tau_mem, enc_tau_syn, hid_tau_mem, hid_tau_syn;
  double out_tau_mem = 0.0;
  double out_tau_syn = 0.0;
  double loss = 0.0;  // forward loss of the same pass

  static Gradients zeros(const NetworkParams& shape);
  void add(const Gradients& other);
};

// Exact reverse-mode differentiation of the forward graph with the
// Heaviside derivative replaced by SuperSpike. The reset is differentiated
// through the product v = p (1 - s). Parameters are used as given.
Gradients bptt_gradients(const NetworkParams& params,
                         std::span<const std::array<double, 6>> inputs,
                         std::span<const EulerAngles> targets,
                         const SurrogateSpec& surrogate = {});

struct AdamConfig {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct LookaheadConfig {
  double alpha = 0.5;  // slow-weight interpolation
  int k = 6;           // inner steps per synchronization
};

struct TrainConfig {
  std::size_t batch_size = 40;
  std::size_t batches_per_epoch = 15;
  std::size_t max_epochs = 2000;       // hard cap, guarantees termination
  std::size_t ma_window = 20;          // validation moving-average window
  double ma_tolerance = 1.10;          // stop when MA exceeds best MA by this
  std::size_t patience = 50;           // epochs without raw-val improvement
  bool quantization_aware = true;      // straight-through-estimator QAT
  double divergence_limit = 1e6;
  // Truncated BPTT: batches sample non-overlapping windows of this many
  // steps instead of whole sequences (0 trains on full sequences). Shorter
  // windows give cheaper, better-conditioned gradients and expose the
  // network to cold starts at arbitrary attitudes. Validation always scores
  // full sequences.
  std::size_t tbptt_window = 0;
  SurrogateSpec surrogate{};
  AdamConfig adam{};
  LookaheadConfig lookahead{};
};

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_moving_avg = 0.0;
  bool stopped = false;
};

struct TrainResult {
  NetworkParams params;  // snapshot at the best raw validation loss; under
                         // quantization-aware training this is the on-grid
                         // model that achieved it (grid projection applied)
  std::vector<EpochRow> history;
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

struct TrainingDiverged : std::runtime_error {
  explicit TrainingDiverged(const std::string& msg)
      : std::runtime_error(msg) {}
};

// BPTT training with Adam wrapped in Lookahead. Batches are drawn uniformly
// with replacement from train_set, or from its TBPTT windows when
// cfg.tbptt_window is set; gradients are computed in parallel across batch
// items and reduced in index order. Stops on the moving-average blow-up
// rule, the raw-validation patience, or max_epochs, whichever fires first.
TrainResult train(const NetworkParams& init,
                  const std::vector<Sequence>& train_set,
                  const std::vector<Sequence>& val_set, const TrainConfig& cfg,
                  std::uint64_t seed);

// CSV: epoch,train_loss,val_loss,val_moving_avg,stopped
void write_training_log(const std::filesystem::path& path,
                        const std::vector<EpochRow>& history);

}  // namespace natt
