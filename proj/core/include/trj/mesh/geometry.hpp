#pragma once

#include "trj/mesh/tri_mesh.hpp"

#include <Eigen/Sparse>

#include <vector>

namespace trj::mesh {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Per-face orthonormal frames anchored at the centroids.
/// Columns of each frame: first tangent (along the first edge), second tangent, unit normal.
struct LocalBasis {
  std::vector<Eigen::Matrix3d> frames;
  Positions centroids;

  int size() const { return static_cast<int>(frames.size()); }
};

LocalBasis build_local_bases(const TriMesh& mesh);

/// Intrinsic piecewise-linear gradients.
///
/// `local[i]` maps the three vertex values of face i to the gradient expressed in
/// the face's two tangent directions. The assembled operator is 3F×N with the
/// normal row of every face left empty, so that L = ∇ᵀ ρ ∇ is the cotangent Laplacian.
struct GradientOperator {
  std::vector<Eigen::Matrix<double, 2, 3>> local;
  SparseMatrix assembled;        // 3F × N
  Eigen::VectorXd face_areas;    // ρ, one weight per face
  Eigen::VectorXd vertex_masses; // lumped: a third of every incident face area

  /// 3×3 block whose first two rows are the tangent-plane gradient and third row zero.
  Eigen::Matrix3d block(int face) const;
  /// ∇ᵀ ρ ∇
  SparseMatrix laplacian() const;
};

GradientOperator face_gradient_operator(const TriMesh& mesh);
GradientOperator face_gradient_operator(const TriMesh& mesh, const LocalBasis& bases);

/// Cotangent weights larger than this in magnitude are clamped.
inline constexpr double kCotangentClamp = 1e8;

struct CotanLaplacian {
  SparseMatrix L;                // positive semi-definite convention: L_ij = -(cot a + cot b) / 2
  Eigen::VectorXd face_areas;
  Eigen::VectorXd vertex_masses;
  int clamped_weights = 0;
};

/// Classic per-edge cotangent assembly.
CotanLaplacian cotan_laplacian(const TriMesh& mesh);

enum class JacobianBasis { kWorld, kLocal };

/// One 3×3 deformation gradient per face. Rows are world coordinates; in the
/// local tag the columns are derivatives along the first-frame tangents plus the
/// deformed unit normal, so the undeformed field is the per-face frame itself.
struct JacobianField {
  std::vector<Eigen::Matrix3d> mats;
  JacobianBasis basis = JacobianBasis::kLocal;

  int size() const { return static_cast<int>(mats.size()); }

  JacobianField to_world(const LocalBasis& bases) const;
  JacobianField to_local(const LocalBasis& bases) const;

  /// F×9 rows, row-major flattening of each matrix.
  RowMatrix to_rows() const;
  static JacobianField from_rows(const RowMatrix& rows, JacobianBasis basis);
};

JacobianField compute_jacobians(const TriMesh& reference, const LocalBasis& bases, const Positions& deformed);
JacobianField compute_jacobians(const TriMesh& reference, const LocalBasis& bases, const GradientOperator& grad,
                                const Positions& deformed);

/// Unit face normals; zero rows for zero-area faces.
Positions face_normals(const TriMesh& mesh, const Positions& positions);
/// Area-weighted unit vertex normals.
Positions vertex_normals(const TriMesh& mesh, const Positions& positions);

/// Lumped vertex masses for the given positions.
Eigen::VectorXd vertex_masses(const TriMesh& mesh, const Positions& positions);

/// Σ m_v x_v / Σ m_v
Eigen::RowVector3d weighted_centroid(const Positions& positions, const Eigen::VectorXd& masses);

}  // namespace trj::mesh
