#include "trj/mesh/tri_mesh.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

namespace trj::mesh {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

double face_area(const TriMesh& mesh, const Positions& positions, int face) {
  const auto f = mesh.faces.row(face);
  const Eigen::Vector3d a = positions.row(f(0)).transpose();
  const Eigen::Vector3d b = positions.row(f(1)).transpose();
  const Eigen::Vector3d c = positions.row(f(2)).transpose();
  return 0.5 * (b - a).cross(c - a).norm();
}

void validate(const TriMesh& mesh) { validate(mesh, mesh.vertices); }

void validate(const TriMesh& mesh, const Positions& positions) {
  const int n = mesh.num_vertices();
  if (positions.rows() != n) {
    throw MeshError("position count " + std::to_string(positions.rows()) + " does not match vertex count " +
                    std::to_string(n));
  }
  if (mesh.num_faces() == 0) throw MeshError("mesh has no faces");
  if (!positions.allFinite()) throw MeshError("mesh has non-finite vertex positions");

  std::unordered_map<std::uint64_t, int> edge_use;
  edge_use.reserve(static_cast<size_t>(mesh.num_faces()) * 3);
  for (int i = 0; i < mesh.num_faces(); ++i) {
    const auto f = mesh.faces.row(i);
    for (int k = 0; k < 3; ++k) {
      if (f(k) < 0 || f(k) >= n) {
        throw MeshError("face " + std::to_string(i) + " references vertex " + std::to_string(f(k)) +
                            " outside [0, " + std::to_string(n) + ")",
                        i);
      }
    }
    if (f(0) == f(1) || f(1) == f(2) || f(0) == f(2)) {
      throw MeshError("face " + std::to_string(i) + " repeats a vertex", i);
    }
    const double area = face_area(mesh, positions, i);
    if (!(area > kMinFaceArea)) {
      throw MeshError("face " + std::to_string(i) + " is degenerate (area " + std::to_string(area) + ")", i);
    }
    for (int k = 0; k < 3; ++k) {
      if (++edge_use[edge_key(f(k), f((k + 1) % 3))] > 2) {
        throw MeshError("face " + std::to_string(i) + " makes edge (" + std::to_string(f(k)) + ", " +
                            std::to_string(f((k + 1) % 3)) + ") non-manifold",
                        i);
      }
    }
  }
}

bool is_connected(const TriMesh& mesh) {
  const int n = mesh.num_vertices();
  if (n == 0) return true;
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (int i = 0; i < mesh.num_faces(); ++i) {
    const int r = find(mesh.faces(i, 0));
    parent[find(mesh.faces(i, 1))] = r;
    parent[find(mesh.faces(i, 2))] = r;
  }
  const int root = find(0);
  for (int v = 1; v < n; ++v) {
    if (find(v) != root) return false;
  }
  return true;
}

double height(const Positions& positions) {
  if (positions.rows() == 0) return 0.0;
  return positions.col(1).maxCoeff() - positions.col(1).minCoeff();
}

}  // namespace trj::mesh
