#include "trj/mesh/primitives.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

namespace trj::mesh {

namespace {

TriMesh from_lists(const std::vector<Eigen::RowVector3d>& verts, const std::vector<Eigen::RowVector3i>& faces) {
  TriMesh m;
  m.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  m.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = verts[i];
  for (size_t i = 0; i < faces.size(); ++i) m.faces.row(static_cast<Eigen::Index>(i)) = faces[i];
  return m;
}

}  // namespace

TriMesh icosphere(int level, double radius) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::RowVector3d> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
      {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Eigen::RowVector3i> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      verts.push_back(((verts[a] + verts[b]) * 0.5).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoints.emplace(key, idx);
      return idx;
    };
    std::vector<Eigen::RowVector3i> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = midpoint(f(0), f(1));
      const int bc = midpoint(f(1), f(2));
      const int ca = midpoint(f(2), f(0));
      next.emplace_back(f(0), ab, ca);
      next.emplace_back(f(1), bc, ab);
      next.emplace_back(f(2), ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    faces = std::move(next);
  }
  TriMesh m = from_lists(verts, faces);
  m.vertices *= radius;
  return m;
}

TriMesh grid(int nx, int ny, double width, double depth) {
  std::vector<Eigen::RowVector3d> verts;
  std::vector<Eigen::RowVector3i> faces;
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) verts.emplace_back(width * i / nx, depth * j / ny, 0.0);
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      faces.emplace_back(id(i, j), id(i + 1, j), id(i + 1, j + 1));
      faces.emplace_back(id(i, j), id(i + 1, j + 1), id(i, j + 1));
    }
  }
  return from_lists(verts, faces);
}

TriMesh capped_cylinder(int segments, int rings, double radius, double length) {
  std::vector<Eigen::RowVector3d> verts;
  std::vector<Eigen::RowVector3i> faces;
  for (int r = 0; r <= rings; ++r) {
    const double y = length * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double a = 2.0 * std::numbers::pi * s / segments;
      verts.emplace_back(radius * std::cos(a), y, -radius * std::sin(a));
    }
  }
  auto id = [segments](int s, int r) { return r * segments + (s % segments); };
  for (int r = 0; r < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      faces.emplace_back(id(s, r), id(s + 1, r), id(s + 1, r + 1));
      faces.emplace_back(id(s, r), id(s + 1, r + 1), id(s, r + 1));
    }
  }
  const int bottom = static_cast<int>(verts.size());
  verts.emplace_back(0.0, 0.0, 0.0);
  const int top = static_cast<int>(verts.size());
  verts.emplace_back(0.0, length, 0.0);
  for (int s = 0; s < segments; ++s) {
    faces.emplace_back(bottom, id(s + 1, 0), id(s, 0));
    faces.emplace_back(top, id(s, rings), id(s + 1, rings));
  }
  return from_lists(verts, faces);
}

}  // namespace trj::mesh
