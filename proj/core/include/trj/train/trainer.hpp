#pragma once

#include "trj/motion/model.hpp"
#include "trj/nn/adam.hpp"
#include "trj/train/losses.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace trj::train {

inline constexpr int kDefaultMaxEpochs = 300;
inline constexpr double kDefaultConvergence = 3e-4;

/// One supervised sequence. Targets live in the model's canonical space and are moved
/// onto the Poisson anchor so the translation the solve cannot express is not penalized.
struct TrainingSample {
  std::string name;
  std::shared_ptr<const motion::ShapeContext> context;
  motion::MotionInput motion;
  std::vector<Positions> frames;   // aligned targets, one per frame
  RowMatrix target_positions;      // (T·N)×3 frame-major
  RowMatrix target_jacobians;      // (T·F)×9 frame-major local rows

  int num_frames() const { return motion.frames(); }
};

TrainingSample make_sample(std::string name, std::shared_ptr<const motion::ShapeContext> context,
                           motion::MotionInput motion, std::span<const Positions> frames);

struct TrainConfig {
  int max_epochs = kDefaultMaxEpochs;
  double convergence = kDefaultConvergence;  // stop once the epoch L_vertex drops below this
  double alpha = kDefaultAlpha;
  nn::AdamConfig adam;
  std::uint64_t seed = 1;
  /// Trains the posing path only; the residual network and both encoders keep their values.
  bool freeze_residual = false;
};

struct EpochRecord {
  int epoch = 0;
  LossReport loss;
};

struct TrainResult {
  bool converged = false;
  int epochs_run = 0;
  std::vector<EpochRecord> history;
  double best_vertex = 0.0;
};

/// Windowed training: one optimizer step per window of one sequence, sequences
/// visited in a seeded shuffled order each epoch.
class Trainer {
 public:
  Trainer(motion::ModelParams& model, TrainConfig config);

  nn::Adam& optimizer() { return *optimizer_; }
  const TrainConfig& config() const { return config_; }
  /// Epoch numbering continues from here (used when resuming).
  void set_start_epoch(int epoch) { next_epoch_ = epoch; }
  int next_epoch() const { return next_epoch_; }

  /// Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;

  /// Runs epochs until convergence or until `max_epochs` epochs have been completed in total.
  TrainResult fit(std::span<const TrainingSample> samples);
  /// One pass over all samples; returns the frame-weighted mean losses seen during the pass.
  LossReport run_epoch(std::span<const TrainingSample> samples);

 private:
  motion::ModelParams& model_;
  TrainConfig config_;
  std::unique_ptr<nn::Adam> optimizer_;
  int next_epoch_ = 0;
};

/// Parameters the trainer updates for a model under a config.
std::vector<nn::Parameter*> trainable_parameters(motion::ModelParams& model, bool freeze_residual);

/// Loss of a whole sequence under the current weights, no updates.
LossReport sequence_loss(const motion::ModelParams& model, const TrainingSample& sample, double alpha = kDefaultAlpha);

}  // namespace trj::train
