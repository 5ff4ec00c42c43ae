#pragma once

#include "trj/common.hpp"

namespace trj::mesh {

/// Smallest admissible triangle area in m².
inline constexpr double kMinFaceArea = 1e-12;

struct TriMesh {
  Positions vertices;
  FaceIndices faces;

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
};

/// Checks index range, repeated vertices, face area and edge-manifoldness.
/// Throws MeshError naming the first offending face.
void validate(const TriMesh& mesh);

/// Same checks against alternative positions for the mesh's connectivity.
void validate(const TriMesh& mesh, const Positions& positions);

/// True when every vertex is reachable from vertex 0 through faces.
bool is_connected(const TriMesh& mesh);

double face_area(const TriMesh& mesh, const Positions& positions, int face);

/// Vertical (y) extent of the positions.
double height(const Positions& positions);

}  // namespace trj::mesh
