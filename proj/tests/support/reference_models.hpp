#pragma once

// Independent reference implementations used as test oracles. Everything in
// this namespace is written directly from the model equations with plain
// scalar code (dense sums, no spike skipping, no shared kernels) so
// agreement with the library is meaningful.

#include <array>
#include <cstddef>
#include <vector>

#include "natt/imu.hpp"
#include "natt/network.hpp"

namespace refm {

struct ScalarLifTrace {
  std::vector<double> v_pre;    // membrane before reset, per step
  std::vector<double> i_after;  // synaptic current after accumulation
  std::vector<int> spikes;
};

// Single-neuron LIF simulation: i' = ts i + c; v' = tm v + i'; spike on
// v' - thr > 0; reset to zero.
ScalarLifTrace lif_trace(double tau_mem, double tau_syn, double threshold,
                         const std::vector<double>& inputs);

// Leaky integrator (no threshold) membrane trace.
std::vector<double> li_trace(double tau_mem, double tau_syn,
                             const std::vector<double>& inputs);

// Whole-network forward with dense matrix products.
std::vector<natt::EulerAngles> network_forward_reference(
    const natt::NetworkParams& p,
    const std::vector<std::array<double, 6>>& inputs);

double loss_reference(const natt::NetworkParams& p,
                      const std::vector<std::array<double, 6>>& inputs,
                      const std::vector<natt::EulerAngles>& targets);

// Flat parameter coordinates for directional derivatives, mirroring the
// component layout of natt::Gradients.
enum class ParamBlock {
  kEncW,
  kFfW,
  kRecW,
  kOutW,
  kEncTauMem,
  kEncTauSyn,
  kHidTauMem,
  kHidTauSyn,
  kOutTauMem,
  kOutTauSyn
};

struct ParamCoord {
  ParamBlock block;
  std::size_t index = 0;
};

// Forward-mode (dual-number) derivative of the surrogate-substituted loss
// with respect to one parameter. The spike VALUE stays the hard Heaviside;
// only its derivative channel uses the SuperSpike slope, exactly as BPTT
// assumes.
double loss_directional_derivative(
    const natt::NetworkParams& p,
    const std::vector<std::array<double, 6>>& inputs,
    const std::vector<natt::EulerAngles>& targets, double surrogate_width,
    const ParamCoord& coord);

// Pure gyro integration references for the degenerate-filter checks.
std::vector<natt::EulerAngles> euler_gyro_integration(
    const natt::Sequence& seq, natt::EulerAngles init);
std::vector<natt::EulerAngles> quaternion_gyro_integration(
    const natt::Sequence& seq, natt::EulerAngles init);

}  // namespace refm
