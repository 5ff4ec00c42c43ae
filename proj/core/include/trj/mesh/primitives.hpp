#pragma once

#include "trj/mesh/tri_mesh.hpp"

namespace trj::mesh {

/// Subdivided icosahedron on the unit sphere: 20·4^level faces.
TriMesh icosphere(int level, double radius = 1.0);

/// Flat grid in the z=0 plane covering [0, width]×[0, depth]; 2·nx·ny faces.
TriMesh grid(int nx, int ny, double width = 1.0, double depth = 1.0);

/// Closed cylinder along +y with fan caps: 2·segments·(rings+1) faces.
TriMesh capped_cylinder(int segments, int rings, double radius, double length);

}  // namespace trj::mesh
