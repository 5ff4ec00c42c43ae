#pragma once

#include "trj/nn/layers.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace trj::nn {

struct GradCheckResult {
  double worst_relative_error = 0.0;  // max over parameters of ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, floor)
  std::string worst_parameter;
  int entries_checked = 0;
};

struct GradCheckOptions {
  int samples_per_parameter = 24;  // entries sampled per tensor; all entries when the tensor is smaller
  double step = 1e-6;
  std::uint64_t seed = 7;
  /// Smallest denominator, in units of the central-difference roundoff ε·max(1, |loss|)/step,
  /// so tensors whose true gradient is identically zero are judged against noise, not zero.
  double noise_floor = 1e5;
};

/// Compares reverse-mode gradients of a scalar loss against central finite
/// differences. `loss` must rebuild the graph on the tape it is given.
GradCheckResult check_gradients(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                                const GradCheckOptions& options = {});

}  // namespace trj::nn
