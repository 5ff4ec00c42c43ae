#include "trj/features/features.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

namespace trj::features {

PointNetLite::PointNetLite(const std::string& name, PointNetConfig config, bool zero_output, nn::Rng& rng)
    : config_(config) {
  const int h = config_.hidden_width;
  first_ = nn::Linear(name + ".l0", kInputWidth, h, nn::Init::kKaimingUniform, rng);
  second_ = nn::Linear(name + ".l1", config_.global_context ? 2 * h : h, h, nn::Init::kKaimingUniform, rng);
  third_ = nn::Linear(name + ".l2", h, h, nn::Init::kKaimingUniform, rng);
  head_ = nn::Linear(name + ".l3", h, config_.learned_width, zero_output ? nn::Init::kZero : nn::Init::kLecunUniform,
                     rng);
}

nn::Var PointNetLite::forward(nn::Tape& tape, const RowMatrix& inputs) const {
  if (inputs.cols() != kInputWidth) {
    throw nn::ShapeError("point features expect " + nn::shape_string(inputs.rows(), kInputWidth) + " inputs, got " +
                         nn::shape_string(inputs.rows(), inputs.cols()));
  }
  nn::Var h = nn::relu(first_.forward(tape.constant(inputs)));
  if (config_.global_context) {
    const std::vector<int> broadcast(static_cast<size_t>(inputs.rows()), 0);
    const nn::Var context = nn::gather_rows(nn::max_rows(h), broadcast);
    const nn::Var parts[] = {h, context};
    h = nn::concat_cols(parts);
  }
  h = nn::relu(second_.forward(h));
  h = nn::relu(third_.forward(h));
  return head_.forward(h);
}

void PointNetLite::collect(std::vector<nn::Parameter*>& out) {
  for (nn::Linear* l : {&first_, &second_, &third_, &head_}) l->collect(out);
}

RowMatrix pointnet_inputs(const Positions& centroids, const Positions& normals) {
  if (centroids.rows() != normals.rows()) throw Error("centroid/normal count mismatch");
  RowMatrix out(centroids.rows(), 6);
  const Eigen::RowVector3d center = centroids.colwise().mean();
  Positions shifted = centroids.rowwise() - center;
  double radius = shifted.rowwise().norm().maxCoeff();
  if (!(radius > 0.0)) radius = 1.0;
  out.leftCols(3) = shifted / radius;
  out.rightCols(3) = normals;
  return out;
}

RowMatrix face_pointnet_inputs(const mesh::TriMesh& mesh) {
  const mesh::LocalBasis bases = mesh::build_local_bases(mesh);
  return pointnet_inputs(bases.centroids, mesh::face_normals(mesh, mesh.vertices));
}

RowMatrix vertex_pointnet_inputs(const mesh::TriMesh& mesh) {
  return pointnet_inputs(mesh.vertices, mesh::vertex_normals(mesh, mesh.vertices));
}

nn::Var pointnet_features(const PointNetLite& net, nn::Tape& tape, const Positions& centroids,
                          const Positions& normals) {
  return net.forward(tape, pointnet_inputs(centroids, normals));
}

RowMatrix wave_kernel_signature_vertices(const mesh::TriMesh& mesh, const WksConfig& config,
                                         const std::string& mesh_name) {
  mesh::validate(mesh);
  const int n = mesh.num_vertices();
  if (n < 4) throw Error("WKS of '" + mesh_name + "' needs at least 4 vertices");
  if (config.bins < 2) throw Error("WKS needs at least 2 energy bins");
  // max_eigenpairs counts the constant mode, leaving max_eigenpairs - 1 non-zero pairs.
  const int k_eigen = std::min(config.max_eigenpairs, n - 1) - 1;

  const mesh::CotanLaplacian lap = mesh::cotan_laplacian(mesh);
  const Eigen::VectorXd inv_sqrt_mass = lap.vertex_masses.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd sym = inv_sqrt_mass.asDiagonal() * Eigen::MatrixXd(lap.L) * inv_sqrt_mass.asDiagonal();
  sym = 0.5 * (sym + sym.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error("Laplace-Beltrami eigensolver did not converge on '" + mesh_name + "'");
  }
  // Index 0 is the constant mode; the signature uses the next k_eigen pairs.
  const Eigen::VectorXd evals = solver.eigenvalues().segment(1, k_eigen);
  if (!(evals(0) > 0.0)) {
    throw Error("Laplace-Beltrami spectrum of '" + mesh_name + "' has more than one zero eigenvalue");
  }
  const Eigen::MatrixXd phi = inv_sqrt_mass.asDiagonal() * solver.eigenvectors().middleCols(1, k_eigen);
  const Eigen::MatrixXd phi_sq = phi.cwiseAbs2();

  const Eigen::ArrayXd log_e = evals.array().log();
  const double e_min = log_e(0);
  const double e_max = log_e(k_eigen - 1);
  const double spacing = (e_max - e_min) / (config.bins - 1);
  const double sigma = config.sigma_fraction * (e_max - e_min);

  RowMatrix wks(n, config.bins);
  for (int b = 0; b < config.bins; ++b) {
    const double e = e_min + b * spacing;
    const Eigen::VectorXd weights = (-(e - log_e).square() / (2.0 * sigma * sigma)).exp().matrix();
    Eigen::VectorXd column = phi_sq * weights;
    const double partition = column.sum();
    if (!(partition > 0.0)) throw Error("WKS bin " + std::to_string(b) + " of '" + mesh_name + "' is empty");
    wks.col(b) = column / partition;
  }
  return wks;
}

RowMatrix vertex_to_face(const mesh::TriMesh& mesh, const RowMatrix& per_vertex) {
  RowMatrix out(mesh.num_faces(), per_vertex.cols());
  for (int i = 0; i < mesh.num_faces(); ++i) {
    out.row(i) = (per_vertex.row(mesh.faces(i, 0)) + per_vertex.row(mesh.faces(i, 1)) +
                  per_vertex.row(mesh.faces(i, 2))) /
                 3.0;
  }
  return out;
}

RowMatrix wave_kernel_signature(const mesh::TriMesh& mesh, const WksConfig& config, const std::string& mesh_name) {
  const RowMatrix per_vertex = wave_kernel_signature_vertices(mesh, config, mesh_name);
  return vertex_to_face(mesh, per_vertex * static_cast<double>(mesh.num_vertices()));
}

RowMatrix assemble_face_features(const RowMatrix& learned, const RowMatrix& wks) {
  if (learned.rows() != wks.rows()) {
    throw Error("feature row mismatch: learned " + std::to_string(learned.rows()) + ", wks " +
                std::to_string(wks.rows()));
  }
  RowMatrix out(learned.rows(), learned.cols() + wks.cols());
  out << learned, wks;
  return out;
}

nn::Var assemble_face_features(const nn::Var& learned, const RowMatrix& wks) {
  if (learned.rows() != wks.rows()) {
    throw Error("feature row mismatch: learned " + std::to_string(learned.rows()) + ", wks " +
                std::to_string(wks.rows()));
  }
  const nn::Var parts[] = {learned, learned.tape().constant(wks)};
  return nn::concat_cols(parts);
}

}  // namespace trj::features
