#include "trj/io/wks_cache.hpp"

#include "trj/io/checkpoint.hpp"

#include <cstdio>
#include <cstring>

namespace trj::io {

std::string wks_cache_key(const mesh::TriMesh& mesh, const features::WksConfig& config) {
  std::vector<std::uint8_t> bytes;
  auto append = [&](const void* p, size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  };
  append(mesh.vertices.data(), sizeof(double) * static_cast<size_t>(mesh.vertices.size()));
  append(mesh.faces.data(), sizeof(int) * static_cast<size_t>(mesh.faces.size()));
  append(&config.max_eigenpairs, sizeof(config.max_eigenpairs));
  append(&config.bins, sizeof(config.bins));
  append(&config.sigma_fraction, sizeof(config.sigma_fraction));
  char key[32];
  std::snprintf(key, sizeof(key), "%08x_%zu", crc32_of(bytes), bytes.size());
  return key;
}

RowMatrix cached_vertex_wks(const mesh::TriMesh& mesh, const features::WksConfig& config,
                            const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return features::wave_kernel_signature_vertices(mesh, config);
  const auto path = cache_dir / ("wks_" + wks_cache_key(mesh, config) + ".trj");
  if (std::filesystem::exists(path)) {
    try {
      const Checkpoint c = load_checkpoint(path);
      RowMatrix wks = c.at("wks").to_matrix();
      if (wks.rows() == mesh.num_vertices() && wks.cols() == config.bins) return wks;
    } catch (const IoError& e) {
      log_warning(std::string("ignoring unreadable WKS cache: ") + e.what());
    }
  }
  RowMatrix wks = features::wave_kernel_signature_vertices(mesh, config);
  std::filesystem::create_directories(cache_dir);
  Checkpoint c;
  c.config = "{\"kind\":\"wks\"}";
  c.tensors.push_back(Tensor::from_matrix("wks", wks));
  save_checkpoint(path, c);
  return wks;
}

}  // namespace trj::io
