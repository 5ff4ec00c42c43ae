#pragma once

#include "trj/io/synth.hpp"
#include "trj/motion/model.hpp"
#include "trj/train/metrics.hpp"
#include "trj/train/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace trj::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitEpochCapped = 2;
inline constexpr int kExitError = 3;

struct SynthOptions {
  std::filesystem::path out;
  int sequences = 5;
  int frames = 64;
  double frame_rate = 30.0;
  std::uint64_t seed = 1;
  bool root_motion = false;
  /// Cycles through these; empty means alternate walk and wave.
  std::vector<io::MotionStyle> styles;
  /// Optional explicit shapes; otherwise drawn from the seed.
  std::vector<io::ShapeParams> shapes;
};

struct TrainOptions {
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path log;        // defaults to <checkpoint>.log
  std::filesystem::path wks_cache;  // empty disables the cache
  std::string baseline = "trj";
  std::uint64_t seed = 1;
  int epochs = train::kDefaultMaxEpochs;
  int window = motion::kDefaultWindow;
  double alpha = train::kDefaultAlpha;
  double lr = 1e-4;
  double convergence = train::kDefaultConvergence;
  bool resume = false;
  bool freeze_residual = false;
  bool quiet = false;
};

struct TrainSummary {
  int exit_code = kExitOk;
  train::TrainResult result;
  int epochs_completed = 0;
};

struct InferOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path target;   // OBJ of the first-frame mesh to animate
  std::filesystem::path motion;   // motion manifest
  std::filesystem::path out;      // directory receiving frame_XXXX.obj
  std::optional<std::vector<double>> beta;
  bool apply_global = true;
  std::filesystem::path wks_cache;
};

struct EvalOptions {
  /// Either a checkpoint evaluated on a dataset, or prediction directories scored against one manifest.
  std::filesystem::path checkpoint;
  std::filesystem::path dataset;
  std::filesystem::path motion;
  std::vector<std::filesystem::path> predictions;
  std::filesystem::path out;  // metrics JSON
  /// Moves both sequences onto the first-frame anchor before scoring (prediction directories only;
  /// checkpoint evaluation already compares in the anchored space the model is trained in).
  bool align_translation = false;
  std::filesystem::path wks_cache;
};

struct EvalRecord {
  std::string name;
  train::MetricReport metrics;
};

struct EvalSummary {
  std::vector<EvalRecord> records;  // sorted by name
  train::MetricReport aggregate;
};

void cmd_synth(const SynthOptions& options);
TrainSummary cmd_train(const TrainOptions& options);
std::vector<Positions> cmd_infer(const InferOptions& options);
EvalSummary cmd_eval(const EvalOptions& options);

/// Ground truth of a sequence with its global transforms removed (the model's canonical space).
std::vector<Positions> canonical_frames(const io::SequenceData& sequence);

/// Pads or checks β against the model's shape width.
Eigen::RowVectorXd fit_beta(const Eigen::RowVectorXd& beta, int width);

/// Builds training samples for every sequence of a dataset.
std::vector<train::TrainingSample> load_samples(const std::vector<io::SequenceData>& data,
                                                const motion::ModelConfig& config,
                                                const std::filesystem::path& wks_cache = {});

/// Predicted frames for a loaded sequence (canonical space).
std::vector<Positions> predict(const motion::ModelParams& model, const train::TrainingSample& sample);

/// Writes frame_XXXX.obj files.
void write_frames(const std::filesystem::path& dir, const FaceIndices& faces, const std::vector<Positions>& frames);
/// Reads frame_0000.obj, frame_0001.obj, ... expecting exactly `count` files.
std::vector<Positions> read_frames(const std::filesystem::path& dir, int count);

void write_metrics(const std::filesystem::path& path, const EvalSummary& summary);

}  // namespace trj::cli
