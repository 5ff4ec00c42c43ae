#include "trj/train/losses.hpp"

namespace trj::train {

LossReport LossTerms::report() const {
  LossReport r;
  r.vertex = vertex.value()(0, 0);
  r.jacobian = jacobian.valid() ? jacobian.value()(0, 0) : 0.0;
  r.total = total.value()(0, 0);
  return r;
}

LossTerms window_losses(const nn::Var& positions, const nn::Var& jacobians, const RowMatrix& gt_positions,
                        const RowMatrix& gt_jacobians, int frames, double alpha) {
  if (frames < 1) throw Error("loss needs at least one frame");
  if (positions.rows() != gt_positions.rows() || positions.cols() != gt_positions.cols()) {
    throw nn::ShapeError("predicted positions " + nn::shape_string(positions.rows(), positions.cols()) +
                         " do not match targets " + nn::shape_string(gt_positions.rows(), gt_positions.cols()));
  }
  nn::Tape& tape = positions.tape();
  LossTerms terms;
  const double n = static_cast<double>(positions.rows());
  terms.vertex = nn::scale(nn::sum_squares(nn::sub(positions, tape.constant(gt_positions))), 1.0 / n);
  if (!jacobians.valid()) {
    terms.total = terms.vertex;
    return terms;
  }
  if (jacobians.rows() != gt_jacobians.rows() || jacobians.cols() != gt_jacobians.cols()) {
    throw nn::ShapeError("predicted Jacobians " + nn::shape_string(jacobians.rows(), jacobians.cols()) +
                         " do not match targets " + nn::shape_string(gt_jacobians.rows(), gt_jacobians.cols()));
  }
  const double f = static_cast<double>(jacobians.rows());
  terms.jacobian = nn::scale(nn::sum_squares(nn::sub(jacobians, tape.constant(gt_jacobians))), 1.0 / f);
  terms.total = nn::add(terms.vertex, nn::scale(terms.jacobian, alpha));
  return terms;
}

LossReport compute_losses(std::span<const Positions> positions, std::span<const RowMatrix> jacobians,
                          std::span<const Positions> gt_positions, std::span<const RowMatrix> gt_jacobians,
                          double alpha) {
  if (positions.size() != gt_positions.size() || jacobians.size() != gt_jacobians.size()) {
    throw Error("prediction and ground truth have different frame counts");
  }
  if (positions.empty()) throw Error("loss needs at least one frame");
  LossReport r;
  double vertex_count = 0.0, face_count = 0.0;
  for (size_t t = 0; t < positions.size(); ++t) {
    if (positions[t].rows() != gt_positions[t].rows()) throw Error("vertex count mismatch at frame " + std::to_string(t));
    r.vertex += (positions[t] - gt_positions[t]).squaredNorm();
    vertex_count += static_cast<double>(positions[t].rows());
  }
  for (size_t t = 0; t < jacobians.size(); ++t) {
    if (jacobians[t].rows() != gt_jacobians[t].rows() || jacobians[t].cols() != gt_jacobians[t].cols()) {
      throw Error("Jacobian shape mismatch at frame " + std::to_string(t));
    }
    r.jacobian += (jacobians[t] - gt_jacobians[t]).squaredNorm();
    face_count += static_cast<double>(jacobians[t].rows());
  }
  r.vertex /= vertex_count;
  if (face_count > 0.0) r.jacobian /= face_count;
  r.total = r.vertex + alpha * r.jacobian;
  return r;
}

std::vector<RowMatrix> jacobian_targets(const mesh::PoissonSystem& system, std::span<const Positions> frames) {
  std::vector<RowMatrix> out;
  out.reserve(frames.size());
  for (const auto& p : frames) {
    out.push_back(mesh::compute_jacobians(system.reference(), system.bases(), system.gradient(), p).to_rows());
  }
  return out;
}

}  // namespace trj::train
