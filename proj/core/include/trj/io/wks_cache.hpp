#pragma once

#include "trj/features/features.hpp"

#include <filesystem>

namespace trj::io {

/// Per-vertex WKS for a mesh, read from `cache_dir` when a file for the same mesh
/// content and settings exists, otherwise computed and stored there.
/// An empty `cache_dir` disables caching.
RowMatrix cached_vertex_wks(const mesh::TriMesh& mesh, const features::WksConfig& config,
                            const std::filesystem::path& cache_dir);

/// Hex key over vertex bytes, face indices and WKS settings.
std::string wks_cache_key(const mesh::TriMesh& mesh, const features::WksConfig& config);

}  // namespace trj::io
