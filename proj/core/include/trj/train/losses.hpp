#pragma once

#include "trj/mesh/poisson.hpp"
#include "trj/nn/tape.hpp"

#include <span>
#include <vector>

namespace trj::train {

inline constexpr double kDefaultAlpha = 0.05;

struct LossReport {
  double vertex = 0.0;    // mean squared vertex distance
  double jacobian = 0.0;  // mean squared Frobenius error
  double total = 0.0;     // vertex + alpha · jacobian
};

struct LossTerms {
  nn::Var vertex;
  nn::Var jacobian;  // invalid when the Jacobian term is unused
  nn::Var total;
  LossReport report() const;
};

/// Differentiable losses over a window. Positions are (T·N)×3 and Jacobians (T·F)×9, frame-major.
/// L_vertex = Σ‖x − x_gt‖² / (T·N), L_Jacobian = Σ‖J − J_gt‖²_F / (T·F).
/// Pass an invalid `jacobians` handle to train on the vertex term only.
LossTerms window_losses(const nn::Var& positions, const nn::Var& jacobians, const RowMatrix& gt_positions,
                        const RowMatrix& gt_jacobians, int frames, double alpha = kDefaultAlpha);

/// The same losses on plain per-frame data (Jacobian rows F×9 per frame).
LossReport compute_losses(std::span<const Positions> positions, std::span<const RowMatrix> jacobians,
                          std::span<const Positions> gt_positions, std::span<const RowMatrix> gt_jacobians,
                          double alpha = kDefaultAlpha);

/// Local Jacobian rows of each frame in the first-frame bases.
std::vector<RowMatrix> jacobian_targets(const mesh::PoissonSystem& system, std::span<const Positions> frames);

}  // namespace trj::train
