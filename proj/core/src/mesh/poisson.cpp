#include "trj/mesh/poisson.hpp"

#include <Eigen/SparseCholesky>

namespace trj::mesh {

namespace {

// Pinning vertex 0 must leave an SPD matrix on a connected, non-degenerate mesh.
bool pinned_is_positive_definite(const SparseMatrix& L) {
  const Eigen::Index n = L.rows();
  if (n < 2) return false;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(L.nonZeros()));
  for (Eigen::Index col = 0; col < L.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(L, col); it; ++it) {
      if (it.row() == 0 || it.col() == 0) continue;
      triplets.emplace_back(it.row() - 1, it.col() - 1, it.value());
    }
  }
  SparseMatrix pinned(n - 1, n - 1);
  pinned.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLLT<SparseMatrix> llt(pinned);
  return llt.info() == Eigen::Success;
}

}  // namespace

PoissonSystem PoissonSystem::prefactorize(const TriMesh& mesh) {
  validate(mesh);
  if (!is_connected(mesh)) throw MeshError("Poisson system requires a connected mesh");

  PoissonSystem sys;
  auto reference = std::make_shared<TriMesh>(mesh);
  auto bases = std::make_shared<LocalBasis>(build_local_bases(mesh));
  auto gradient = std::make_shared<GradientOperator>(face_gradient_operator(mesh, *bases));

  const int n = mesh.num_vertices();
  const SparseMatrix L = gradient->laplacian();
  if (!pinned_is_positive_definite(L)) {
    throw MeshError("pinned Laplacian is not positive definite; mesh is broken");
  }

  sys.constraint_ = gradient->vertex_masses / gradient->vertex_masses.sum();
  sys.anchor_ = weighted_centroid(mesh.vertices, gradient->vertex_masses);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(L.nonZeros()) + 2 * n);
  for (Eigen::Index col = 0; col < L.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(L, col); it; ++it) triplets.emplace_back(it.row(), it.col(), it.value());
  }
  for (int v = 0; v < n; ++v) {
    triplets.emplace_back(n, v, sys.constraint_(v));
    triplets.emplace_back(v, n, sys.constraint_(v));
  }
  SparseMatrix augmented(n + 1, n + 1);
  augmented.setFromTriplets(triplets.begin(), triplets.end());
  augmented.makeCompressed();

  auto solver = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
  solver->analyzePattern(augmented);
  solver->factorize(augmented);
  if (solver->info() != Eigen::Success) {
    throw MeshError("factorization of the constrained Poisson system failed: " + solver->lastErrorMessage());
  }

  sys.reference_ = std::move(reference);
  sys.bases_ = std::move(bases);
  sys.gradient_ = std::move(gradient);
  sys.solver_ = std::move(solver);
  return sys;
}

RowMatrix PoissonSystem::apply_divergence(const RowMatrix& jacobian_rows, int frames) const {
  const int nf = num_faces();
  const auto& faces = reference_->faces;
  RowMatrix rhs = RowMatrix::Zero(num_vertices() + 1, 3 * frames);
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < nf; ++i) {
      const double* J = jacobian_rows.row(static_cast<Eigen::Index>(t) * nf + i).data();
      const auto& G = gradient_->local[i];
      const double rho = gradient_->face_areas(i);
      for (int k = 0; k < 3; ++k) {
        double* out = rhs.row(faces(i, k)).data() + 3 * t;
        for (int a = 0; a < 3; ++a) out[a] += rho * (G(0, k) * J[3 * a] + G(1, k) * J[3 * a + 1]);
      }
    }
  }
  return rhs;
}

RowMatrix PoissonSystem::solve_rows(const RowMatrix& jacobian_rows) const {
  const int nf = num_faces();
  const int n = num_vertices();
  if (jacobian_rows.cols() != 9 || jacobian_rows.rows() % nf != 0) {
    throw Error("Poisson solve expects T*" + std::to_string(nf) + " x 9 Jacobian rows, got " +
                std::to_string(jacobian_rows.rows()) + " x " + std::to_string(jacobian_rows.cols()));
  }
  if (!jacobian_rows.allFinite()) throw Error("Poisson solve received non-finite Jacobian entries");
  const int frames = static_cast<int>(jacobian_rows.rows() / nf);
  RowMatrix rhs = apply_divergence(jacobian_rows, frames);
  for (int t = 0; t < frames; ++t) rhs.block<1, 3>(n, 3 * t) = anchor_;

  const Eigen::MatrixXd solution = solver_->solve(Eigen::MatrixXd(rhs));
  RowMatrix out(static_cast<Eigen::Index>(frames) * n, 3);
  for (int t = 0; t < frames; ++t) {
    out.middleRows(static_cast<Eigen::Index>(t) * n, n) = solution.block(0, 3 * t, n, 3);
  }
  return out;
}

RowMatrix PoissonSystem::adjoint_rows(const RowMatrix& position_grads) const {
  const int nf = num_faces();
  const int n = num_vertices();
  if (position_grads.cols() != 3 || position_grads.rows() % n != 0) {
    throw Error("Poisson adjoint expects T*N x 3 gradients");
  }
  const int frames = static_cast<int>(position_grads.rows() / n);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 1, 3 * frames);
  for (int t = 0; t < frames; ++t) {
    rhs.block(0, 3 * t, n, 3) = position_grads.middleRows(static_cast<Eigen::Index>(t) * n, n);
  }
  // The augmented matrix is symmetric, so its adjoint solve reuses the factorization.
  const Eigen::MatrixXd y = solver_->solve(rhs);

  const auto& faces = reference_->faces;
  RowMatrix out = RowMatrix::Zero(static_cast<Eigen::Index>(frames) * nf, 9);
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < nf; ++i) {
      const auto& G = gradient_->local[i];
      const double rho = gradient_->face_areas(i);
      double* g = out.row(static_cast<Eigen::Index>(t) * nf + i).data();
      for (int k = 0; k < 3; ++k) {
        const int v = faces(i, k);
        for (int a = 0; a < 3; ++a) {
          const double yv = y(v, 3 * t + a);
          g[3 * a] += rho * G(0, k) * yv;
          g[3 * a + 1] += rho * G(1, k) * yv;
        }
      }
    }
  }
  return out;
}

Positions PoissonSystem::solve(const JacobianField& jacobians) const {
  if (jacobians.size() != num_faces()) {
    throw Error("Jacobian field has " + std::to_string(jacobians.size()) + " faces, system has " +
                std::to_string(num_faces()));
  }
  const JacobianField local = jacobians.to_local(*bases_);
  return solve_rows(local.to_rows());
}

Positions PoissonSystem::align_to_anchor(const Positions& positions) const {
  Positions out = positions;
  const Eigen::RowVector3d shift = anchor_ - weighted_centroid(positions, gradient_->vertex_masses);
  out.rowwise() += shift;
  return out;
}

}  // namespace trj::mesh
