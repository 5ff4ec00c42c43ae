#pragma once

#include "trj/io/checkpoint.hpp"
#include "trj/motion/model.hpp"
#include "trj/nn/adam.hpp"

#include <filesystem>
#include <string>

namespace trj::train {

/// Training progress stored next to the weights.
struct TrainingState {
  int epochs_completed = 0;
  bool converged = false;
  double last_vertex_loss = 0.0;
};

std::string model_config_to_json(const motion::ModelConfig& config);
motion::ModelConfig model_config_from_json(const std::string& text);

/// Weights, optional optimizer moments ("adam.m.<name>", "adam.v.<name>", "adam.steps") and a config echo.
io::Checkpoint make_model_checkpoint(motion::ModelParams& model, const nn::Adam* optimizer, const TrainingState& state);

struct LoadedModel {
  motion::ModelParams params;
  TrainingState state;
  io::Checkpoint checkpoint;
};

LoadedModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, motion::ModelParams& model, const nn::Adam* optimizer,
                const TrainingState& state);

/// Restores optimizer moments and the step count; throws naming any missing tensor.
void restore_optimizer(const io::Checkpoint& checkpoint, nn::Adam& optimizer);

}  // namespace trj::train
