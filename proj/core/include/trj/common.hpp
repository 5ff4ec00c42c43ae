#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace trj {

/// N×3 vertex positions, one row per vertex.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
/// F×3 vertex indices, one row per triangle.
using FaceIndices = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
/// Dense row-major matrix used across the numeric and neural modules.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid meshes; carries the offending face (or -1).
class MeshError : public Error {
 public:
  MeshError(const std::string& what, int face = -1) : Error(what), face_(face) {}
  int face() const noexcept { return face_; }

 private:
  int face_;
};

/// Raised for file-format and persistence problems.
class IoError : public Error {
 public:
  using Error::Error;
};

void log_warning(const std::string& message);
void log_info(const std::string& message);

/// Applies the TRJ_THREADS cap (if set) to Eigen's worker pool.
void configure_threads_from_env();

}  // namespace trj
