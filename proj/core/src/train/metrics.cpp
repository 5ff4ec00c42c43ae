#include "trj/train/metrics.hpp"

#include <cmath>
#include <numbers>

namespace trj::train {

namespace {
constexpr double kCentimeters = 100.0;
}

double mean_normal_angle_deg(const Positions& a, const Positions& b) {
  if (a.rows() != b.rows() || a.rows() == 0) throw Error("normal sets differ in size");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    // half-angle form: exact zero for identical normals and accurate near 180 degrees
    sum += 2.0 * std::atan2((a.row(i) - b.row(i)).norm(), (a.row(i) + b.row(i)).norm());
  }
  return sum / static_cast<double>(a.rows()) * 180.0 / std::numbers::pi;
}

MetricReport evaluate_frames(const mesh::PoissonSystem& reference, std::span<const Positions> predicted,
                             std::span<const Positions> ground_truth, const MetricOptions& options) {
  if (ground_truth.empty()) throw Error("evaluation needs ground truth frames");
  if (predicted.size() != ground_truth.size()) {
    throw Error("prediction has " + std::to_string(predicted.size()) + " frames, ground truth has " +
                std::to_string(ground_truth.size()));
  }
  const auto& ref = reference.reference();
  const int n = ref.num_vertices();
  std::vector<Positions> pred(predicted.begin(), predicted.end());
  std::vector<Positions> gt(ground_truth.begin(), ground_truth.end());
  for (size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].rows() != n || gt[t].rows() != n) {
      throw Error("frame " + std::to_string(t) + " does not match the reference vertex count");
    }
    if (options.align_translation) {
      pred[t] = reference.align_to_anchor(pred[t]);
      gt[t] = reference.align_to_anchor(gt[t]);
    }
  }

  MetricReport r;
  r.frames = static_cast<int>(pred.size());
  for (size_t t = 0; t < pred.size(); ++t) {
    r.l2_v_cm += (pred[t] - gt[t]).rowwise().norm().mean();
    const auto jp = mesh::compute_jacobians(ref, reference.bases(), reference.gradient(), pred[t]).to_rows();
    const auto jg = mesh::compute_jacobians(ref, reference.bases(), reference.gradient(), gt[t]).to_rows();
    r.l2_j += (jp - jg).rowwise().norm().mean();
    r.l2_n_deg += mean_normal_angle_deg(mesh::face_normals(ref, pred[t]), mesh::face_normals(ref, gt[t]));
  }
  const double frames = static_cast<double>(pred.size());
  r.l2_v_cm *= kCentimeters / frames;
  r.l2_j /= frames;
  r.l2_n_deg /= frames;
  if (pred.size() >= 3) {
    double jitter = 0.0;
    for (size_t t = 1; t + 1 < pred.size(); ++t) {
      jitter += (pred[t + 1] - 2.0 * pred[t] + pred[t - 1]).rowwise().norm().mean();
    }
    r.jitter_cm = kCentimeters * jitter / static_cast<double>(pred.size() - 2);
  }
  return r;
}

MetricReport aggregate(std::span<const MetricReport> reports) {
  MetricReport out;
  double total = 0.0;
  for (const auto& r : reports) {
    const double w = r.frames;
    out.l2_v_cm += w * r.l2_v_cm;
    out.l2_j += w * r.l2_j;
    out.l2_n_deg += w * r.l2_n_deg;
    out.jitter_cm += w * r.jitter_cm;
    out.frames += r.frames;
    total += w;
  }
  if (total > 0.0) {
    out.l2_v_cm /= total;
    out.l2_j /= total;
    out.l2_n_deg /= total;
    out.jitter_cm /= total;
  }
  return out;
}

}  // namespace trj::train
