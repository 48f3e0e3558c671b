#include "natt/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "natt/common.hpp"

namespace natt {

void QuantSpec::validate() const {
  if (!(step > 0.0) || !(q_min < q_max))
    throw ValidationError("quant spec requires step > 0 and q_min < q_max");
  double kmin = q_min / step;
  double kmax = q_max / step;
  if (kmin != std::round(kmin) || kmax != std::round(kmax))
    throw ValidationError("quant spec bounds must lie on the grid");
}

QuantSpec weight_quant_spec() {
  // 256 levels of width 2/256; the positive end stops one step short of +1.
  return {-1.0, 127.0 / 128.0, 2.0 / 256.0};
}

QuantSpec decay_quant_spec() { return {0.0, 1.0, 1.0 / 4096.0}; }

double quantize(double p, const QuantSpec& spec) {
  // std::round ties away from zero, matching the hardware rounding mode.
  double q = std::round(p / spec.step) * spec.step;
  return std::clamp(q, spec.q_min, spec.q_max);
}

std::int64_t to_hardware_integer(double p, const QuantSpec& spec) {
  double q = quantize(p, spec);
  return static_cast<std::int64_t>(std::llround(q / spec.step));
}

double from_hardware_integer(std::int64_t k, const QuantSpec& spec) {
  double v = static_cast<double>(k) * spec.step;
  if (v < spec.q_min || v > spec.q_max)
    throw ValidationError("hardware integer outside quantization range");
  return v;
}

}  // namespace natt
