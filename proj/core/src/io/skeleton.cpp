#include "trj/io/skeleton.hpp"

#include <cmath>

namespace trj::io {

int KinematicTree::root() const {
  for (int j = 0; j < joints(); ++j) {
    if (parents[static_cast<size_t>(j)] < 0) return j;
  }
  throw Error("kinematic tree has no root");
}

void KinematicTree::validate() const {
  const int n = joints();
  if (n == 0) throw Error("kinematic tree is empty");
  if (static_cast<int>(offsets.size()) != n) throw Error("kinematic tree: offsets and parents differ in length");
  if (!names.empty() && static_cast<int>(names.size()) != n) {
    throw Error("kinematic tree: names and parents differ in length");
  }
  int roots = 0;
  for (int j = 0; j < n; ++j) {
    const int p = parents[static_cast<size_t>(j)];
    if (p < 0) {
      ++roots;
    } else if (p >= j) {
      throw Error("kinematic tree: joint " + std::to_string(j) + " must come after its parent " + std::to_string(p));
    }
    if (!offsets[static_cast<size_t>(j)].allFinite()) {
      throw Error("kinematic tree: non-finite offset at joint " + std::to_string(j));
    }
  }
  if (roots != 1) throw Error("kinematic tree must have exactly one root, found " + std::to_string(roots));
}

std::vector<Eigen::Vector3d> KinematicTree::rest_positions() const {
  std::vector<Eigen::Vector3d> out(offsets.size());
  for (int j = 0; j < joints(); ++j) {
    const int p = parents[static_cast<size_t>(j)];
    out[static_cast<size_t>(j)] =
        (p < 0 ? Eigen::Vector3d::Zero() : out[static_cast<size_t>(p)]) + offsets[static_cast<size_t>(j)];
  }
  return out;
}

Eigen::Matrix3d euler_xyz(const Eigen::Vector3d& a) {
  return (Eigen::AngleAxisd(a.x(), Eigen::Vector3d::UnitX()) * Eigen::AngleAxisd(a.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(a.z(), Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

std::vector<JointPose> forward_kinematics(const KinematicTree& tree, const Eigen::RowVectorXd& angles) {
  const int n = tree.joints();
  if (angles.size() != 3 * n) {
    throw Error("pose has " + std::to_string(angles.size()) + " angles, tree needs " + std::to_string(3 * n));
  }
  std::vector<JointPose> poses(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    const Eigen::Matrix3d local = euler_xyz(angles.segment<3>(3 * j).transpose());
    const Eigen::Vector3d& off = tree.offsets[static_cast<size_t>(j)];
    const int p = tree.parents[static_cast<size_t>(j)];
    JointPose& g = poses[static_cast<size_t>(j)];
    if (p < 0) {
      g.rotation = local;
      g.position = off;
    } else {
      const JointPose& gp = poses[static_cast<size_t>(p)];
      g.rotation = gp.rotation * local;
      g.position = gp.position + gp.rotation * off;
    }
  }
  return poses;
}

void validate_skin_weights(const RowMatrix& weights, int joints) {
  if (weights.cols() != joints) throw Error("skinning weights must have one column per joint");
  for (Eigen::Index v = 0; v < weights.rows(); ++v) {
    if ((weights.row(v).array() < 0.0).any() || !weights.row(v).allFinite()) {
      throw Error("skinning weights of vertex " + std::to_string(v) + " must be finite and non-negative");
    }
    if (std::abs(weights.row(v).sum() - 1.0) > 1e-8) {
      throw Error("skinning weights of vertex " + std::to_string(v) + " do not sum to 1");
    }
  }
}

Positions lbs_pose(const Positions& rest, const KinematicTree& tree, const RowMatrix& weights,
                   const Eigen::RowVectorXd& angles) {
  if (weights.rows() != rest.rows()) throw Error("skinning weights must have one row per vertex");
  const auto poses = forward_kinematics(tree, angles);
  const auto rest_joints = tree.rest_positions();
  Positions out = Positions::Zero(rest.rows(), 3);
  for (int j = 0; j < tree.joints(); ++j) {
    const auto& g = poses[static_cast<size_t>(j)];
    const Eigen::RowVector3d shift = (g.position - g.rotation * rest_joints[static_cast<size_t>(j)]).transpose();
    for (Eigen::Index v = 0; v < rest.rows(); ++v) {
      const double w = weights(v, j);
      if (w == 0.0) continue;
      out.row(v) += w * (rest.row(v) * g.rotation.transpose() + shift);
    }
  }
  return out;
}

}  // namespace trj::io
