#include "trj/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace trj::train {

TrainingSample make_sample(std::string name, std::shared_ptr<const motion::ShapeContext> context,
                           motion::MotionInput motion, std::span<const Positions> frames) {
  if (!context) throw Error("training sample '" + name + "' has no shape context");
  if (static_cast<int>(frames.size()) != motion.frames()) {
    throw Error("sequence '" + name + "' has " + std::to_string(frames.size()) + " meshes for " +
                std::to_string(motion.frames()) + " poses");
  }
  const auto& sys = context->poisson;
  const int n = sys.num_vertices();
  const int f = sys.num_faces();
  TrainingSample s;
  s.name = std::move(name);
  s.context = std::move(context);
  s.motion = std::move(motion);
  s.target_positions.resize(static_cast<Eigen::Index>(frames.size()) * n, 3);
  s.target_jacobians.resize(static_cast<Eigen::Index>(frames.size()) * f, 9);
  for (size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].rows() != n) throw Error("sequence '" + s.name + "' frame " + std::to_string(t) + " has the wrong vertex count");
    s.frames.push_back(sys.align_to_anchor(frames[t]));
    s.target_positions.middleRows(static_cast<Eigen::Index>(t) * n, n) = s.frames.back();
    s.target_jacobians.middleRows(static_cast<Eigen::Index>(t) * f, f) =
        mesh::compute_jacobians(sys.reference(), sys.bases(), sys.gradient(), s.frames.back()).to_rows();
  }
  return s;
}

std::vector<nn::Parameter*> trainable_parameters(motion::ModelParams& model, bool freeze_residual) {
  std::vector<nn::Parameter*> out;
  for (auto* p : model.parameters()) {
    const std::string& n = p->name();
    const bool residual_path = n.rfind("residual", 0) == 0 || n.rfind("pose_encoder", 0) == 0;
    if (freeze_residual && residual_path) continue;
    out.push_back(p);
  }
  return out;
}

Trainer::Trainer(motion::ModelParams& model, TrainConfig config)
    : model_(model),
      config_(config),
      optimizer_(std::make_unique<nn::Adam>(trainable_parameters(model, config.freeze_residual), config.adam)) {
  if (config_.max_epochs < 0) throw Error("epoch count must be non-negative");
}

namespace {

struct WindowLoss {
  LossReport report;
  double frames = 0.0;
};

template <typename Step>
void for_each_window(const motion::ModelParams& model, const TrainingSample& s, double alpha, Step&& step) {
  const int frames = s.num_frames();
  const int window = model.config().window;
  if (window < 1) throw Error("window length must be positive");
  const int n = s.context->num_vertices();
  const int f = s.context->num_faces();
  const bool use_jacobians = model.config().variant != motion::Variant::kVertexOde;
  motion::WindowCarry carry;
  nn::Tape tape;
  for (int start = 0; start < frames; start += window) {
    const int end = std::min(frames, start + window);
    const int len = end - start;
    motion::WindowOutput out = motion::forward_window(model, tape, *s.context, s.motion, start, end, carry);
    const RowMatrix gt_pos = s.target_positions.middleRows(static_cast<Eigen::Index>(start) * n,
                                                           static_cast<Eigen::Index>(len) * n);
    const RowMatrix gt_jac = use_jacobians ? RowMatrix(s.target_jacobians.middleRows(
                                                 static_cast<Eigen::Index>(start) * f, static_cast<Eigen::Index>(len) * f))
                                           : RowMatrix();
    LossTerms terms = window_losses(out.positions, use_jacobians ? out.jacobians : nn::Var(), gt_pos, gt_jac, len, alpha);
    step(tape, terms, len);
    carry = std::move(out.carry);
    tape.clear();
  }
}

}  // namespace

LossReport sequence_loss(const motion::ModelParams& model, const TrainingSample& sample, double alpha) {
  LossReport sum;
  double frames = 0.0;
  for_each_window(model, sample, alpha, [&](nn::Tape&, const LossTerms& terms, int len) {
    const LossReport r = terms.report();
    sum.vertex += r.vertex * len;
    sum.jacobian += r.jacobian * len;
    frames += len;
  });
  sum.vertex /= frames;
  sum.jacobian /= frames;
  sum.total = sum.vertex + alpha * sum.jacobian;
  return sum;
}

LossReport Trainer::run_epoch(std::span<const TrainingSample> samples) {
  if (samples.empty()) throw Error("training needs at least one sequence");
  const int epoch = next_epoch_;
  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config_.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);

  LossReport sum;
  double frames = 0.0;
  for (size_t idx : order) {
    const TrainingSample& s = samples[idx];
    const std::string where = "epoch " + std::to_string(epoch) + " on sequence '" + s.name + "'";
    try {
      for_each_window(model_, s, config_.alpha, [&](nn::Tape& tape, const LossTerms& terms, int len) {
        const LossReport r = terms.report();
        if (!std::isfinite(r.total)) {
          throw Error("non-finite loss at " + where);
        }
        tape.backward(terms.total);
        optimizer_->step();
        sum.vertex += r.vertex * len;
        sum.jacobian += r.jacobian * len;
        frames += len;
      });
    } catch (const nn::ShapeError&) {
      throw;
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.find(where) != std::string::npos) throw;
      throw Error(msg + " (" + where + ")");
    }
  }
  sum.vertex /= frames;
  sum.jacobian /= frames;
  sum.total = sum.vertex + config_.alpha * sum.jacobian;
  ++next_epoch_;
  return sum;
}

TrainResult Trainer::fit(std::span<const TrainingSample> samples) {
  TrainResult result;
  result.best_vertex = std::numeric_limits<double>::infinity();
  while (next_epoch_ < config_.max_epochs) {
    const int epoch = next_epoch_;
    EpochRecord rec{epoch, run_epoch(samples)};
    result.history.push_back(rec);
    ++result.epochs_run;
    result.best_vertex = std::min(result.best_vertex, rec.loss.vertex);
    if (on_epoch) on_epoch(rec);
    if (rec.loss.vertex < config_.convergence) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace trj::train
