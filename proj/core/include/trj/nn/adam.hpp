#pragma once

#include "trj/nn/tape.hpp"

#include <vector>

namespace trj::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. A step whose gradients contain a
/// non-finite value is skipped entirely and counted.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  /// Applies one update from the accumulated gradients, then clears them.
  /// Returns false when the step was skipped.
  bool step();
  void zero_grad();

  long steps() const { return steps_; }
  long skipped() const { return skipped_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

  const std::vector<Parameter*>& params() const { return params_; }
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void restore_steps(long steps) { steps_ = steps; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  long steps_ = 0;
  long skipped_ = 0;
};

}  // namespace trj::nn
