#pragma once

#include "trj/mesh/tri_mesh.hpp"

#include <filesystem>
#include <istream>

namespace trj::io {

/// Reads `v` and triangular `f` records; other records are ignored.
/// Faces with more than three corners are rejected with their line number.
mesh::TriMesh load_obj(const std::filesystem::path& path);
mesh::TriMesh parse_obj(std::istream& in, const std::string& source = "<stream>");

/// Writes vertices with 17 significant digits so a reload is bit-exact.
void save_obj(const std::filesystem::path& path, const mesh::TriMesh& mesh);
void save_obj(const std::filesystem::path& path, const FaceIndices& faces, const Positions& positions);

}  // namespace trj::io
