#pragma once

#include "trj/io/manifest.hpp"
#include "trj/mesh/tri_mesh.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace trj::io {

/// Body proportions as multipliers of a unit-height default body.
struct ShapeParams {
  double arm_length = 1.0;
  double arm_radius = 1.0;
  double leg_length = 1.0;
  double leg_radius = 1.0;
  double torso_height = 1.0;
  double torso_width = 1.0;
  double torso_depth = 1.0;
  double neck_length = 1.0;
  double head_size = 1.0;

  static constexpr int kUsed = 9;
  /// Zero-padded to `width` entries.
  Eigen::RowVectorXd to_beta(int width = 16) const;
  /// Throws for non-positive or non-finite entries among the used ones.
  static ShapeParams from_beta(const Eigen::RowVectorXd& beta);
  void validate() const;
};

enum class MotionStyle { kRest, kWalk, kWave };
std::string to_string(MotionStyle s);
MotionStyle parse_motion_style(const std::string& s);

/// angle(t) = amplitude · (sin(2π f t + phase) − sin(phase)), so the first frame is the rest pose.
struct Oscillator {
  int joint = 0;
  int axis = 0;
  double amplitude = 0.0;
  double frequency = 1.0;
  double phase = 0.0;
};

struct SynthConfig {
  std::string name = "seq_000";
  ShapeParams shape;
  MotionStyle style = MotionStyle::kWalk;
  int frames = 64;
  double frame_rate = 30.0;
  std::uint64_t seed = 1;
  double amplitude_scale = 1.0;
  /// Adds a root yaw sway and a forward drift stored as global transforms.
  bool root_motion = false;
};

/// The rigged body: 300 triangles driven by a 12-joint tree.
struct Rig {
  mesh::TriMesh rest;
  KinematicTree tree;
  RowMatrix weights;  // N × joints
};

struct SynthSequence {
  Rig rig;
  MotionManifest manifest;  // gt_meshes filled in by write_sequence
  std::vector<Positions> frames;
};

inline constexpr int kSynthJoints = 12;

KinematicTree humanoid_tree(const ShapeParams& shape);
Rig build_humanoid(const ShapeParams& shape);
std::vector<Oscillator> motion_preset(MotionStyle style, std::uint64_t seed, double amplitude_scale);
RowMatrix sample_angles(const std::vector<Oscillator>& oscillators, int joints, int frames, double frame_rate);
SynthSequence synth_generate(const SynthConfig& config);

/// Distinct, valid shapes drawn from `seed`.
std::vector<ShapeParams> sample_shapes(int count, std::uint64_t seed);

/// Writes `<dir>/motion.json`, `<dir>/rest.obj` and `<dir>/gt/frame_XXXX.obj`.
void write_sequence(const std::filesystem::path& dir, SynthSequence& sequence);

/// One loaded training or evaluation sequence.
struct SequenceData {
  std::string name;
  std::filesystem::path manifest_path;
  MotionManifest manifest;
  mesh::TriMesh first_frame;       // X_0
  std::vector<Positions> frames;   // ground truth, world space
};

SequenceData load_sequence(const std::filesystem::path& manifest_path);

inline constexpr const char* kDatasetIndex = "dataset.json";
/// Accepts the index file or the directory holding it.
std::vector<SequenceData> load_dataset(const std::filesystem::path& path);
void save_dataset_index(const std::filesystem::path& dir, const std::vector<std::string>& sequence_dirs);

}  // namespace trj::io
