#pragma once

#include "trj/mesh/geometry.hpp"
#include "trj/nn/layers.hpp"

#include <string>

namespace trj::features {

struct PointNetConfig {
  int learned_width = 32;
  int hidden_width = 64;
  /// Concatenates a max-pooled shape context to every face after the first layer.
  bool global_context = false;
};

/// Shallow per-face point network: three ReLU layers and a linear head over
/// (normalized centroid, unit normal).
class PointNetLite {
 public:
  static constexpr int kInputWidth = 6;

  PointNetLite() = default;
  PointNetLite(const std::string& name, PointNetConfig config, bool zero_output, nn::Rng& rng);

  /// inputs: F×6 rows from `pointnet_inputs`. Returns F×learned_width.
  nn::Var forward(nn::Tape& tape, const RowMatrix& inputs) const;
  const PointNetConfig& config() const { return config_; }
  void collect(std::vector<nn::Parameter*>& out);

 private:
  PointNetConfig config_;
  nn::Linear first_, second_, third_, head_;
};

/// Centroids shifted to zero mean and divided by the bounding-sphere radius,
/// concatenated with unit normals: one 6-wide row per point.
RowMatrix pointnet_inputs(const Positions& centroids, const Positions& normals);
RowMatrix face_pointnet_inputs(const mesh::TriMesh& mesh);
RowMatrix vertex_pointnet_inputs(const mesh::TriMesh& mesh);

nn::Var pointnet_features(const PointNetLite& net, nn::Tape& tape, const Positions& centroids,
                          const Positions& normals);

struct WksConfig {
  int max_eigenpairs = 64;
  int bins = 16;
  /// Gaussian width as a fraction of the log-energy range.
  double sigma_fraction = 7.0 / 16.0;
};

/// Per-vertex Wave Kernel Signature: N×bins, non-negative, every bin summing to 1 over vertices.
RowMatrix wave_kernel_signature_vertices(const mesh::TriMesh& mesh, const WksConfig& config = {},
                                         const std::string& mesh_name = "mesh");

/// Per-face signature: vertex values rescaled to unit mean (×N) and averaged over each face's corners.
RowMatrix wave_kernel_signature(const mesh::TriMesh& mesh, const WksConfig& config = {},
                                const std::string& mesh_name = "mesh");

/// Face average of a per-vertex table.
RowMatrix vertex_to_face(const mesh::TriMesh& mesh, const RowMatrix& per_vertex);

/// [learned | wks], learned block first.
RowMatrix assemble_face_features(const RowMatrix& learned, const RowMatrix& wks);
nn::Var assemble_face_features(const nn::Var& learned, const RowMatrix& wks);

}  // namespace trj::features
