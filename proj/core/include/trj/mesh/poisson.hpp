#pragma once

#include "trj/mesh/geometry.hpp"

#include <Eigen/SparseLU>

#include <memory>

namespace trj::mesh {

/// Prefactorized least-squares integration of a Jacobian field into vertex positions.
///
/// Solves  min_X Σ_i ρ_i ‖∇_i X − J_iᵀ‖²  subject to the mass-weighted centroid of X
/// equalling the centroid of the reference mesh. The translation nullspace is removed by
/// augmenting L = ∇ᵀρ∇ with the centroid constraint row, so no single vertex is pinned.
/// Only the two tangent columns of each local Jacobian influence the solution.
///
/// The handle is immutable after construction and may be shared across threads.
class PoissonSystem {
 public:
  static PoissonSystem prefactorize(const TriMesh& mesh);

  const TriMesh& reference() const { return *reference_; }
  const LocalBasis& bases() const { return *bases_; }
  const GradientOperator& gradient() const { return *gradient_; }
  const Eigen::RowVector3d& anchor() const { return anchor_; }
  const Eigen::VectorXd& masses() const { return gradient_->vertex_masses; }
  int num_vertices() const { return reference_->num_vertices(); }
  int num_faces() const { return reference_->num_faces(); }

  Positions solve(const JacobianField& jacobians) const;

  /// Batched solve over T frames. Input: T·F × 9 local Jacobian rows (frame-major).
  /// Output: T·N × 3 positions (frame-major).
  RowMatrix solve_rows(const RowMatrix& jacobian_rows) const;

  /// Transpose of solve_rows' linear part: maps dLoss/dPositions (T·N × 3) to
  /// dLoss/dJacobians (T·F × 9). The normal column always receives zero.
  RowMatrix adjoint_rows(const RowMatrix& position_grads) const;

  /// Moves every frame so its mass-weighted centroid sits on the anchor.
  Positions align_to_anchor(const Positions& positions) const;

 private:
  PoissonSystem() = default;

  RowMatrix apply_divergence(const RowMatrix& jacobian_rows, int frames) const;

  std::shared_ptr<const TriMesh> reference_;
  std::shared_ptr<const LocalBasis> bases_;
  std::shared_ptr<const GradientOperator> gradient_;
  std::shared_ptr<const Eigen::SparseLU<SparseMatrix>> solver_;
  Eigen::VectorXd constraint_;  // normalized vertex masses
  Eigen::RowVector3d anchor_;
};

}  // namespace trj::mesh
