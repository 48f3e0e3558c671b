#pragma once

#include <memory>
#include <string>
#include <vector>

#include "natt/filters.hpp"
#include "natt/network.hpp"

namespace natt {

// Common face of the SNN and the classical filters so evaluation code can
// treat them interchangeably.
class AttitudeEstimator {
 public:
  virtual ~AttitudeEstimator() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  // known_initial seeds filter state with truth[0]; the network has no
  // injectable state and always starts from rest.
  [[nodiscard]] virtual std::vector<EulerAngles> estimate(
      const Sequence& seq, bool known_initial) const = 0;
};

class SnnEstimator final : public AttitudeEstimator {
 public:
  explicit SnnEstimator(NetworkParams params);
  [[nodiscard]] std::string name() const override { return "snn"; }
  [[nodiscard]] std::vector<EulerAngles> estimate(
      const Sequence& seq, bool known_initial) const override;
  [[nodiscard]] const NetworkParams& params() const { return params_; }

 private:
  NetworkParams params_;      // as loaded
  NetworkParams effective_;   // grids applied once
};

class FilterEstimator final : public AttitudeEstimator {
 public:
  FilterEstimator(FilterKind kind, FilterParams params,
                  std::string display_name = "");
  [[nodiscard]] std::string name() const override { return name_; }
  [[nodiscard]] std::vector<EulerAngles> estimate(
      const Sequence& seq, bool known_initial) const override;

 private:
  FilterKind kind_;
  FilterParams params_;
  std::string name_;
};

}  // namespace natt
