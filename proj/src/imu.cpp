#include "natt/imu.hpp"

#include <algorithm>
#include <cmath>

#include "natt/common.hpp"

namespace natt {

void NormalizationSpec::validate() const {
  for (int k = 0; k < 6; ++k) {
    if (!(min[k] < max[k]) || !std::isfinite(min[k]) || !std::isfinite(max[k]))
      throw ValidationError("normalization spec requires min < max per channel");
  }
}

std::array<double, 6> normalize(const ImuSample& s,
                                const NormalizationSpec& spec) {
  std::array<double, 6> raw{s.gyro[0], s.gyro[1], s.gyro[2],
                            s.accel[0], s.accel[1], s.accel[2]};
  std::array<double, 6> out{};
  for (int k = 0; k < 6; ++k) {
    out[k] = 2.0 * (raw[k] - spec.min[k]) / (spec.max[k] - spec.min[k]) - 1.0;
  }
  return out;
}

NormalizationSpec fit_normalization(const std::vector<Sequence>& seqs,
                                    double margin) {
  if (seqs.empty()) throw ValidationError("fit_normalization: empty dataset");
  std::array<double, 6> peak{};
  peak.fill(1e-9);
  for (const auto& seq : seqs) {
    for (const auto& s : seq.samples) {
      std::array<double, 6> raw{s.gyro[0], s.gyro[1], s.gyro[2],
                                s.accel[0], s.accel[1], s.accel[2]};
      for (int k = 0; k < 6; ++k)
        peak[k] = std::max(peak[k], std::abs(raw[k]));
    }
  }
  NormalizationSpec spec;
  for (int k = 0; k < 6; ++k) {
    spec.max[k] = margin * peak[k];
    spec.min[k] = -spec.max[k];
  }
  spec.validate();
  return spec;
}

}  // namespace natt
