#pragma once

#include "trj/io/skeleton.hpp"
#include "trj/motion/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace trj::io {

/// Motion description for one sequence. Mesh paths are relative to the manifest file.
struct MotionManifest {
  std::string name;
  KinematicTree tree;
  double frame_rate = 30.0;
  RowMatrix angles;           // frames × 3·joints
  Eigen::RowVectorXd beta;    // shape signature
  std::vector<std::string> gt_meshes;
  std::vector<motion::RigidTransform> global_transforms;  // empty or one per frame
  std::string rest_mesh;      // optional

  int frames() const { return static_cast<int>(angles.rows()); }
  /// Shapes agree, values are finite, the tree is valid.
  void validate() const;
};

inline constexpr const char* kMotionFormat = "trj-motion";
inline constexpr int kMotionVersion = 1;

/// Reads and validates a manifest. Missing referenced files are reported by path.
MotionManifest load_motion(const std::filesystem::path& path, bool check_files = true);
void save_motion(const std::filesystem::path& path, const MotionManifest& manifest);

/// Moves the root joint's rotation into per-frame global transforms and zeroes the root angles.
/// The posed, globally transformed geometry is unchanged.
MotionManifest zero_root_orientation(const MotionManifest& manifest);

/// Whole-sequence world positions: skinning followed by the manifest's global transforms.
std::vector<Positions> pose_sequence(const MotionManifest& manifest, const Positions& rest, const RowMatrix& weights);

}  // namespace trj::io
