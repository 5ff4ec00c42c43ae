#include "trj/mesh/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace trj::mesh {

namespace {

Eigen::Vector3d vertex(const Positions& p, int v) { return p.row(v).transpose(); }

}  // namespace

LocalBasis build_local_bases(const TriMesh& mesh) {
  const int nf = mesh.num_faces();
  LocalBasis out;
  out.frames.resize(nf);
  out.centroids.resize(nf, 3);
  for (int i = 0; i < nf; ++i) {
    const auto f = mesh.faces.row(i);
    const Eigen::Vector3d a = vertex(mesh.vertices, f(0));
    const Eigen::Vector3d b = vertex(mesh.vertices, f(1));
    const Eigen::Vector3d c = vertex(mesh.vertices, f(2));
    const Eigen::Vector3d e1 = b - a;
    const Eigen::Vector3d cross = e1.cross(c - a);
    if (!(0.5 * cross.norm() > kMinFaceArea)) {
      throw MeshError("cannot build a frame for degenerate face " + std::to_string(i), i);
    }
    const Eigen::Vector3d t1 = e1.normalized();
    const Eigen::Vector3d n = cross.normalized();
    out.frames[i].col(0) = t1;
    out.frames[i].col(1) = n.cross(t1);
    out.frames[i].col(2) = n;
    out.centroids.row(i) = ((a + b + c) / 3.0).transpose();
  }
  return out;
}

Eigen::Matrix3d GradientOperator::block(int face) const {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m.topRows<2>() = local[face];
  return m;
}

SparseMatrix GradientOperator::laplacian() const {
  Eigen::VectorXd rho(assembled.rows());
  for (Eigen::Index i = 0; i < face_areas.size(); ++i) rho.segment<3>(3 * i).setConstant(face_areas(i));
  SparseMatrix L = assembled.transpose() * rho.asDiagonal() * assembled;
  L.prune(0.0);
  return L;
}

GradientOperator face_gradient_operator(const TriMesh& mesh) {
  return face_gradient_operator(mesh, build_local_bases(mesh));
}

GradientOperator face_gradient_operator(const TriMesh& mesh, const LocalBasis& bases) {
  const int nf = mesh.num_faces();
  GradientOperator op;
  op.local.resize(nf);
  op.face_areas.resize(nf);
  op.vertex_masses = Eigen::VectorXd::Zero(mesh.num_vertices());

  Eigen::Matrix<double, 2, 3> differences;
  differences << -1, 1, 0, -1, 0, 1;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(nf) * 6);
  for (int i = 0; i < nf; ++i) {
    const auto f = mesh.faces.row(i);
    const Eigen::Vector3d a = vertex(mesh.vertices, f(0));
    const Eigen::Vector3d e1 = vertex(mesh.vertices, f(1)) - a;
    const Eigen::Vector3d e2 = vertex(mesh.vertices, f(2)) - a;
    const Eigen::Matrix3d& frame = bases.frames[i];

    Eigen::Matrix2d edges;
    edges << e1.dot(frame.col(0)), e1.dot(frame.col(1)), e2.dot(frame.col(0)), e2.dot(frame.col(1));
    const double det = edges.determinant();
    if (!(std::abs(det) > 2.0 * kMinFaceArea)) {
      throw MeshError("gradient undefined on degenerate face " + std::to_string(i), i);
    }
    op.local[i] = edges.inverse() * differences;
    op.face_areas(i) = 0.5 * std::abs(det);
    for (int k = 0; k < 3; ++k) {
      op.vertex_masses(f(k)) += op.face_areas(i) / 3.0;
      triplets.emplace_back(3 * i, f(k), op.local[i](0, k));
      triplets.emplace_back(3 * i + 1, f(k), op.local[i](1, k));
    }
  }
  op.assembled.resize(3 * nf, mesh.num_vertices());
  op.assembled.setFromTriplets(triplets.begin(), triplets.end());
  return op;
}

CotanLaplacian cotan_laplacian(const TriMesh& mesh) {
  const int nf = mesh.num_faces();
  const int nv = mesh.num_vertices();
  CotanLaplacian out;
  out.face_areas.resize(nf);
  out.vertex_masses = Eigen::VectorXd::Zero(nv);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(nf) * 12);
  for (int i = 0; i < nf; ++i) {
    const auto f = mesh.faces.row(i);
    const double area = face_area(mesh, mesh.vertices, i);
    out.face_areas(i) = area;
    for (int k = 0; k < 3; ++k) {
      out.vertex_masses(f(k)) += area / 3.0;
      const int v = f(k);
      const int a = f((k + 1) % 3);
      const int b = f((k + 2) % 3);
      const Eigen::Vector3d u = vertex(mesh.vertices, a) - vertex(mesh.vertices, v);
      const Eigen::Vector3d w = vertex(mesh.vertices, b) - vertex(mesh.vertices, v);
      const double sine = u.cross(w).norm();
      double cot = sine > 0.0 ? u.dot(w) / sine : kCotangentClamp;
      if (!(std::abs(cot) <= kCotangentClamp)) {
        cot = std::clamp(std::isnan(cot) ? kCotangentClamp : cot, -kCotangentClamp, kCotangentClamp);
        ++out.clamped_weights;
      }
      const double weight = 0.5 * cot;
      triplets.emplace_back(a, b, -weight);
      triplets.emplace_back(b, a, -weight);
      triplets.emplace_back(a, a, weight);
      triplets.emplace_back(b, b, weight);
    }
  }
  if (out.clamped_weights > 0) {
    log_warning(std::to_string(out.clamped_weights) + " cotangent weight(s) clamped to +/-1e8");
  }
  out.L.resize(nv, nv);
  out.L.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

JacobianField JacobianField::to_world(const LocalBasis& bases) const {
  if (basis == JacobianBasis::kWorld) return *this;
  if (bases.size() != size()) throw Error("basis count does not match Jacobian count");
  JacobianField out;
  out.basis = JacobianBasis::kWorld;
  out.mats.resize(mats.size());
  for (size_t i = 0; i < mats.size(); ++i) out.mats[i] = mats[i] * bases.frames[i].transpose();
  return out;
}

JacobianField JacobianField::to_local(const LocalBasis& bases) const {
  if (basis == JacobianBasis::kLocal) return *this;
  if (bases.size() != size()) throw Error("basis count does not match Jacobian count");
  JacobianField out;
  out.basis = JacobianBasis::kLocal;
  out.mats.resize(mats.size());
  for (size_t i = 0; i < mats.size(); ++i) out.mats[i] = mats[i] * bases.frames[i];
  return out;
}

RowMatrix JacobianField::to_rows() const {
  RowMatrix rows(size(), 9);
  for (int i = 0; i < size(); ++i) {
    Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(rows.row(i).data()) = mats[i];
  }
  return rows;
}

JacobianField JacobianField::from_rows(const RowMatrix& rows, JacobianBasis basis) {
  if (rows.cols() != 9) throw Error("Jacobian rows must have 9 columns, got " + std::to_string(rows.cols()));
  JacobianField out;
  out.basis = basis;
  out.mats.resize(rows.rows());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out.mats[i] = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(rows.row(i).data());
  }
  return out;
}

JacobianField compute_jacobians(const TriMesh& reference, const LocalBasis& bases, const Positions& deformed) {
  return compute_jacobians(reference, bases, face_gradient_operator(reference, bases), deformed);
}

JacobianField compute_jacobians(const TriMesh& reference, const LocalBasis& bases, const GradientOperator& grad,
                                const Positions& deformed) {
  if (deformed.rows() != reference.num_vertices()) {
    throw Error("deformed positions have " + std::to_string(deformed.rows()) + " rows, reference has " +
                std::to_string(reference.num_vertices()) + " vertices");
  }
  if (bases.size() != reference.num_faces() || static_cast<int>(grad.local.size()) != reference.num_faces()) {
    throw Error("bases/gradient operator do not match the reference face count");
  }
  JacobianField out;
  out.basis = JacobianBasis::kLocal;
  out.mats.resize(reference.num_faces());
  for (int i = 0; i < reference.num_faces(); ++i) {
    const auto f = reference.faces.row(i);
    Eigen::Matrix3d corners;
    for (int k = 0; k < 3; ++k) corners.col(k) = vertex(deformed, f(k));
    Eigen::Matrix3d& J = out.mats[i];
    J.leftCols<2>() = corners * grad.local[i].transpose();
    const Eigen::Vector3d n = (corners.col(1) - corners.col(0)).cross(corners.col(2) - corners.col(0));
    const double len = n.norm();
    J.col(2) = len > 0.0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::Zero();
  }
  return out;
}

Positions face_normals(const TriMesh& mesh, const Positions& positions) {
  Positions out(mesh.num_faces(), 3);
  for (int i = 0; i < mesh.num_faces(); ++i) {
    const auto f = mesh.faces.row(i);
    const Eigen::Vector3d a = vertex(positions, f(0));
    const Eigen::Vector3d n = (vertex(positions, f(1)) - a).cross(vertex(positions, f(2)) - a);
    const double len = n.norm();
    out.row(i) = len > 2.0 * kMinFaceArea ? Eigen::RowVector3d(n.transpose() / len) : Eigen::RowVector3d::Zero();
  }
  return out;
}

Positions vertex_normals(const TriMesh& mesh, const Positions& positions) {
  Positions out = Positions::Zero(mesh.num_vertices(), 3);
  for (int i = 0; i < mesh.num_faces(); ++i) {
    const auto f = mesh.faces.row(i);
    const Eigen::Vector3d a = vertex(positions, f(0));
    const Eigen::Vector3d n = (vertex(positions, f(1)) - a).cross(vertex(positions, f(2)) - a);
    if (!(n.norm() > 2.0 * kMinFaceArea)) continue;
    for (int k = 0; k < 3; ++k) out.row(f(k)) += n.transpose();
  }
  for (Eigen::Index v = 0; v < out.rows(); ++v) {
    const double len = out.row(v).norm();
    if (len > 0.0) out.row(v) /= len;
  }
  return out;
}

Eigen::VectorXd vertex_masses(const TriMesh& mesh, const Positions& positions) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int i = 0; i < mesh.num_faces(); ++i) {
    const double a = face_area(mesh, positions, i) / 3.0;
    for (int k = 0; k < 3; ++k) m(mesh.faces(i, k)) += a;
  }
  return m;
}

Eigen::RowVector3d weighted_centroid(const Positions& positions, const Eigen::VectorXd& masses) {
  return (masses.transpose() * positions) / masses.sum();
}

}  // namespace trj::mesh
