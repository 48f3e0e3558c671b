#pragma once

#include <cstdint>

namespace natt {

// Uniform quantization grid: q(p) = clamp(round(p / step) * step).
// Ties round half away from zero. step must divide the representable range
// so that q_min and q_max are themselves grid points.
struct QuantSpec {
  double q_min;
  double q_max;
  double step;

  // Throws ValidationError if step <= 0 or q_min/q_max are off-grid.
  void validate() const;
};

// Loihi-style 8-bit signed weight grid: step 2/256, k in [-128, 127],
// i.e. values in [-1, 127/128]. The step is a power of two, so quantized
// weights are exact binary fractions.
QuantSpec weight_quant_spec();

// 12-bit decay grid on [0, 1]: step 1/4096, k in [0, 4096].
QuantSpec decay_quant_spec();

double quantize(double p, const QuantSpec& spec);

// Grid index k such that quantize(p) == k * step.
std::int64_t to_hardware_integer(double p, const QuantSpec& spec);

double from_hardware_integer(std::int64_t k, const QuantSpec& spec);

}  // namespace natt
