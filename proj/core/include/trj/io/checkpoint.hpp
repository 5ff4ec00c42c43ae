#pragma once

#include "trj/nn/tape.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace trj::io {

/// Binary container:
///   "TRJ1" | u32 version | u32 n + n bytes of config JSON | u32 tensor count |
///   tensors { u32 name length, name, u8 element type, u32 rank, u64 dims[rank], payload } |
///   u32 crc32 of every preceding byte.
/// All integers and payloads are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ElementType : std::uint8_t { kFloat64 = 0, kFloat32 = 1 };

struct Tensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  ElementType type = ElementType::kFloat64;
  std::vector<double> values;  // stored as double in memory regardless of the on-disk type

  static Tensor from_matrix(const std::string& name, const RowMatrix& m);
  RowMatrix to_matrix() const;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config;  // JSON text
  std::vector<Tensor> tensors;

  const Tensor* find(const std::string& name) const;
  /// Throws IoError naming the tensor when absent.
  const Tensor& at(const std::string& name) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Appends one tensor per parameter, named after the parameter.
void add_parameters(Checkpoint& ckpt, std::span<nn::Parameter* const> params, const std::string& prefix = "");
/// Copies tensors into parameters; a missing tensor or a shape mismatch throws and names it.
void restore_parameters(const Checkpoint& ckpt, std::span<nn::Parameter* const> params, const std::string& prefix = "");

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace trj::io
