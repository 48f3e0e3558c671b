#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "natt/imu.hpp"
#include "natt/lif.hpp"
#include "natt/quantize.hpp"

namespace natt {

// Spiking attitude network: 6 inputs -> current-encoding LIF layer ->
// recurrent LIF layer -> 2 leaky-integrator outputs whose membrane
// potentials are pitch and roll in radians.
//
// Weight layouts (flat row/column vectors of doubles):
//   enc_w  n_enc x 6, target-major: enc_w[i*6 + k] drives encoder neuron i
//          from input channel k.
//   ff_w   source-major: ff_w[j*n_hid + i] connects encoder spike j to
//          hidden neuron i. Column-contiguous per source so spike-driven
//          accumulation and the transposed backward pass stay cache-local.
//   rec_w  source-major like ff_w; source is the hidden spike vector from
//          the previous timestep (self-connections allowed).
//   out_w  2 x n_hid, target-major: out_w[a*n_hid + j].
struct NetworkParams {
  std::size_t n_in = 6;
  std::size_t n_enc = 100;
  std::size_t n_hid = 100;
  static constexpr std::size_t kOut = 2;

  std::vector<double> enc_w;
  std::vector<double> ff_w;
  std::vector<double> rec_w;
  std::vector<double> out_w;

  LifParams enc;
  LifParams hid;
  double out_tau_mem = 0.5;  // shared by both decoder units
  double out_tau_syn = 0.5;

  bool quantized = true;  // snap weights/decays to hardware grids in forward
  NormalizationSpec norm;

  [[nodiscard]] std::size_t weight_count() const {
    return enc_w.size() + ff_w.size() + rec_w.size() + out_w.size();
  }
  // Trained neuron parameters: one decay pair per spiking neuron plus the
  // shared decoder pair. Thresholds are fixed and excluded.
  [[nodiscard]] std::size_t neuron_param_count() const {
    return 2 * (n_enc + n_hid) + 2;
  }
  void validate() const;
};

// Copy with all weights on the 8-bit grid and all decays on the 12-bit grid
// when params.quantized is set; identity copy otherwise.
NetworkParams effective_params(const NetworkParams& params);

struct ForwardResult {
  std::vector<EulerAngles> estimates;
  std::vector<SpikeVector> enc_spikes;  // one vector per timestep
  std::vector<SpikeVector> hid_spikes;
};

// Runs the network over a normalized input stream. Serial and
// deterministic; throws ValidationError with the timestep index if an
// output turns non-finite. Parameters are used as given (quantization, if
// requested, must already be applied via effective_params).
ForwardResult network_forward(const NetworkParams& params,
                              std::span<const std::array<double, 6>> inputs,
                              CurrentCoupling coupling = kDefaultCoupling);

std::vector<std::array<double, 6>> normalize_sequence(
    const Sequence& seq, const NormalizationSpec& spec);

// Normalizes with params.norm, applies effective_params, runs the forward.
ForwardResult forward_sequence(const NetworkParams& params,
                               const Sequence& seq);

// forward_sequence over many sequences, parallel across sequences with
// results in input order (bit-identical to the serial loop).
std::vector<ForwardResult> batch_forward(const NetworkParams& params,
                                         const std::vector<Sequence>& seqs);

// Fresh network: weights U(-1/sqrt(fan_in), +1/sqrt(fan_in)) snapped to the
// weight grid (never exceeding the bound), decays uniform in [0.3, 0.9],
// decoder decays 0.5, thresholds fixed at 0.5.
NetworkParams init_network(std::size_t n_enc, std::size_t n_hid,
                           std::uint64_t seed,
                           const NormalizationSpec& norm = {},
                           bool quantized = true);

// Removes neurons whose firing rate is strictly below threshold, dropping
// every attached weight row/column. Throws ValidationError if a layer would
// lose all neurons.
NetworkParams prune(const NetworkParams& params,
                    const std::vector<double>& enc_rate,
                    const std::vector<double>& hid_rate, double threshold);

// Versioned JSON container with shapes, weights, decays, thresholds, the
// quantization flag, and the normalization spec. Exact double round-trip.
void save_params(const std::filesystem::path& path,
                 const NetworkParams& params);
NetworkParams load_params(const std::filesystem::path& path);

}  // namespace natt
