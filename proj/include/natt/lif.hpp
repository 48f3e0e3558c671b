#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "natt/common.hpp"

namespace natt {

using SpikeVector = std::vector<std::uint8_t>;

// Which synaptic current enters the membrane update. kUpdatedCurrent is
// i(t+1) = tau_syn i(t) + c, then v(t+1) = tau_mem v(t) + i(t+1): the decayed
// current with this step's input already accumulated. kPreviousCurrent feeds
// the pre-update current instead; kept selectable so the one-step phase
// difference stays testable.
enum class CurrentCoupling { kUpdatedCurrent, kPreviousCurrent };

inline constexpr CurrentCoupling kDefaultCoupling =
    CurrentCoupling::kUpdatedCurrent;

// Per-neuron leaky integrate-and-fire parameters. Decays are unitless
// per-step factors in [0, 1]; threshold is in membrane units.
struct LifParams {
  std::vector<double> tau_mem;
  std::vector<double> tau_syn;
  std::vector<double> threshold;

  [[nodiscard]] std::size_t size() const { return tau_mem.size(); }
  void validate() const;
};

struct LifState {
  std::vector<double> v;
  std::vector<double> i;

  explicit LifState(std::size_t n = 0) : v(n, 0.0), i(n, 0.0) {}
};

// Single-neuron update shared by the layer ops and the network kernel so
// both paths use the identical floating-point expression. Emits a spike on
// v - threshold > 0 (strictly); the membrane resets to zero on spike.
inline bool lif_neuron_update(double& v, double& i, double tau_mem,
                              double tau_syn, double threshold, double input,
                              CurrentCoupling coupling = kDefaultCoupling) {
  if (coupling == CurrentCoupling::kUpdatedCurrent) {
    i = tau_syn * i + input;
    v = tau_mem * v + i;
  } else {
    double i_prev = i;
    i = tau_syn * i + input;
    v = tau_mem * v + i_prev;
  }
  bool spike = (v - threshold) > 0.0;
  if (spike) v = 0.0;
  return spike;
}

// Leaky-integrator update: a LIF neuron with the threshold/reset removed.
inline void li_neuron_update(double& v, double& i, double tau_mem,
                             double tau_syn, double input,
                             CurrentCoupling coupling = kDefaultCoupling) {
  if (coupling == CurrentCoupling::kUpdatedCurrent) {
    i = tau_syn * i + input;
    v = tau_mem * v + i;
  } else {
    double i_prev = i;
    i = tau_syn * i + input;
    v = tau_mem * v + i_prev;
  }
}

// Advances a whole layer one step given the summed synaptic input per
// neuron. Throws ValidationError on dimension mismatch.
SpikeVector lif_step(LifState& state, const LifParams& params,
                     std::span<const double> input,
                     CurrentCoupling coupling = kDefaultCoupling);

// Decoder step: shared decay pair across all units, no spiking. The
// membrane potentials are the readout.
void li_step(LifState& state, double tau_mem, double tau_syn,
             std::span<const double> input,
             CurrentCoupling coupling = kDefaultCoupling);

}  // namespace natt
