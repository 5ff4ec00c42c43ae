#pragma once

#include "trj/common.hpp"
#include <Eigen/Geometry>

#include <string>
#include <vector>

namespace trj::io {

/// Joint hierarchy with rest offsets relative to the parent (root: absolute position).
struct KinematicTree {
  std::vector<int> parents;  // -1 for the root
  std::vector<Eigen::Vector3d> offsets;
  std::vector<std::string> names;

  int joints() const { return static_cast<int>(parents.size()); }
  int root() const;
  /// Acyclic, single root, parents precede children, finite offsets.
  void validate() const;
  std::vector<Eigen::Vector3d> rest_positions() const;
};

/// R = Rx(a)·Ry(b)·Rz(c), angles in radians.
Eigen::Matrix3d euler_xyz(const Eigen::Vector3d& angles);

struct JointPose {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d position;
};

/// Forward kinematics for one frame of relative Euler angles (3·joints wide).
std::vector<JointPose> forward_kinematics(const KinematicTree& tree, const Eigen::RowVectorXd& angles);

/// Linear blend skinning. Weight rows must be non-negative and sum to 1 within 1e-8.
Positions lbs_pose(const Positions& rest, const KinematicTree& tree, const RowMatrix& weights,
                   const Eigen::RowVectorXd& angles);

void validate_skin_weights(const RowMatrix& weights, int joints);

}  // namespace trj::io
