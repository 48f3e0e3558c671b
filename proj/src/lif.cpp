#include "natt/lif.hpp"

namespace natt {

void LifParams::validate() const {
  std::size_t n = tau_mem.size();
  if (tau_syn.size() != n || threshold.size() != n)
    throw ValidationError("LIF parameter vectors must share one length");
  for (std::size_t k = 0; k < n; ++k) {
    if (!(tau_mem[k] >= 0.0 && tau_mem[k] <= 1.0) ||
        !(tau_syn[k] >= 0.0 && tau_syn[k] <= 1.0))
      throw ValidationError("LIF decays must lie in [0, 1]");
  }
}

SpikeVector lif_step(LifState& state, const LifParams& params,
                     std::span<const double> input, CurrentCoupling coupling) {
  const std::size_t n = params.size();
  if (state.v.size() != n || state.i.size() != n || input.size() != n)
    throw ValidationError("lif_step: dimension mismatch");
  SpikeVector spikes(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    spikes[k] = lif_neuron_update(state.v[k], state.i[k], params.tau_mem[k],
                                  params.tau_syn[k], params.threshold[k],
                                  input[k], coupling)
                    ? 1
                    : 0;
  }
  return spikes;
}

void li_step(LifState& state, double tau_mem, double tau_syn,
             std::span<const double> input, CurrentCoupling coupling) {
  const std::size_t n = state.v.size();
  if (state.i.size() != n || input.size() != n)
    throw ValidationError("li_step: dimension mismatch");
  for (std::size_t k = 0; k < n; ++k) {
    li_neuron_update(state.v[k], state.i[k], tau_mem, tau_syn, input[k],
                     coupling);
  }
}

}  // namespace natt
