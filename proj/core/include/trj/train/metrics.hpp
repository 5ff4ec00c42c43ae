#pragma once

#include "trj/mesh/poisson.hpp"

#include <span>
#include <string>
#include <vector>

namespace trj::train {

struct MetricReport {
  double l2_v_cm = 0.0;   // mean vertex-to-vertex distance, centimeters
  double l2_j = 0.0;      // mean Frobenius error of per-face Jacobians
  double l2_n_deg = 0.0;  // mean angle between face normals, degrees
  double jitter_cm = 0.0; // mean norm of the second finite difference of predicted vertices, centimeters
  int frames = 0;
};

struct MetricOptions {
  /// Moves every frame of both sequences so its mass-weighted centroid sits on the reference anchor.
  bool align_translation = false;
};

/// Compares a predicted sequence against ground truth. Jacobians of both are measured
/// from positions in the reference mesh's bases, so any method can be scored.
MetricReport evaluate_frames(const mesh::PoissonSystem& reference, std::span<const Positions> predicted,
                             std::span<const Positions> ground_truth, const MetricOptions& options = {});

/// Frame-weighted mean of several reports.
MetricReport aggregate(std::span<const MetricReport> reports);

/// Mean angle in degrees between corresponding unit normals.
double mean_normal_angle_deg(const Positions& a, const Positions& b);

}  // namespace trj::train
