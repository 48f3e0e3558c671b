#include "natt/estimator.hpp"

namespace natt {

SnnEstimator::SnnEstimator(NetworkParams params)
    : params_(std::move(params)), effective_(effective_params(params_)) {}

std::vector<EulerAngles> SnnEstimator::estimate(const Sequence& seq,
                                                bool /*known_initial*/) const {
  auto inputs = normalize_sequence(seq, effective_.norm);
  return network_forward(effective_, inputs).estimates;
}

FilterEstimator::FilterEstimator(FilterKind kind, FilterParams params,
                                 std::string display_name)
    : kind_(kind), params_(std::move(params)), name_(std::move(display_name)) {
  if (name_.empty()) {
    name_ = to_string(kind_);
    if (kind_ == FilterKind::kComplementary &&
        std::get<ComplementaryParams>(params_).adaptive)
      name_ = "adaptive";
  }
}

std::vector<EulerAngles> FilterEstimator::estimate(const Sequence& seq,
                                                   bool known_initial) const {
  return run_filter(kind_, params_, seq, known_initial);
}

}  // namespace natt
