#include "trj/motion/model.hpp"

#include <Eigen/LU>

#include <cmath>

namespace trj::motion {

namespace {

std::vector<int> repeat_each(int count, int times) {
  std::vector<int> idx(static_cast<size_t>(count) * times);
  for (int i = 0; i < count; ++i) {
    for (int k = 0; k < times; ++k) idx[static_cast<size_t>(i) * times + k] = i;
  }
  return idx;
}

std::vector<int> tile(int count, int times) {
  std::vector<int> idx(static_cast<size_t>(count) * times);
  for (int i = 0; i < times; ++i) {
    for (int k = 0; k < count; ++k) idx[static_cast<size_t>(i) * count + k] = k;
  }
  return idx;
}

RowMatrix time_codes(std::span<const double> times, int bands) {
  RowMatrix codes(static_cast<Eigen::Index>(times.size()), 2 * bands);
  for (size_t i = 0; i < times.size(); ++i) codes.row(static_cast<Eigen::Index>(i)) = nn::positional_encoding(times[i], bands);
  return codes;
}

/// Last row of every group of `per_group` rows.
RowMatrix last_of_groups(const RowMatrix& rows, Eigen::Index per_group) {
  const Eigen::Index groups = rows.rows() / per_group;
  RowMatrix out(groups, rows.cols());
  for (Eigen::Index g = 0; g < groups; ++g) out.row(g) = rows.row(g * per_group + per_group - 1);
  return out;
}

Var encode_window(const nn::MultiHeadAttention& encoder, const Var& block, const RowMatrix& codes) {
  const Eigen::Index steps = codes.rows();
  if (steps == 0 || block.rows() == 0) throw nn::ShapeError("cannot encode an empty window");
  if (block.rows() % steps != 0) {
    throw nn::ShapeError("window block " + nn::shape_string(block.rows(), block.cols()) + " is not a multiple of " +
                         std::to_string(steps) + " time steps");
  }
  const int faces = static_cast<int>(block.rows() / steps);
  nn::Tape& tape = block.tape();
  const Var parts[] = {block, nn::gather_rows(tape.constant(codes), tile(static_cast<int>(steps), faces))};
  return encoder.forward(nn::concat_cols(parts), steps);
}

WindowOutput forward_vertex_window(const ModelParams& params, nn::Tape& tape, const ShapeContext& ctx,
                                   const MotionInput& motion, int start, int end, const WindowCarry& carry) {
  const ModelConfig& cfg = params.config();
  const int n = ctx.num_vertices();
  const int frames = motion.frames();
  const std::vector<double> times = window_step_times(start, end, frames);
  const int steps = static_cast<int>(times.size());

  RowMatrix initial = carry.positions.size() ? carry.positions : RowMatrix(ctx.mesh().vertices);
  Var rates = tape.constant(RowMatrix(0, 3));
  if (steps > 0) {
    RowMatrix poses(steps, cfg.pose_width());
    for (int s = 0; s < steps; ++s) {
      // step s advances to frame (first stepped frame + s) from the pose one frame earlier
      const int frame = (start == 0 ? 1 : start) + s - 1;
      poses.row(s) = motion.angles.row(frame);
    }
    const std::vector<int> per_vertex = repeat_each(n, steps);
    const std::vector<int> per_step = tile(steps, n);
    RowMatrix beta_row = motion.beta;
    const Var parts[] = {
        nn::gather_rows(tape.constant(ctx.vertex_inputs), per_vertex),
        nn::gather_rows(tape.constant(ctx.vertex_wks), per_vertex),
        nn::gather_rows(tape.constant(poses), per_step),
        nn::gather_rows(tape.constant(beta_row), std::vector<int>(per_step.size(), 0)),
        nn::gather_rows(tape.constant(time_codes(times, cfg.time_bands)), per_step),
    };
    rates = params.velocity.forward(nn::concat_cols(parts));
  }
  const Var positions_vm = nn::euler_accumulate(rates, tape.constant(initial), steps, euler_step(frames), start == 0);
  const int window = end - start;
  WindowOutput out;
  out.positions = nn::gather_rows(positions_vm, face_major_to_frame_major(n, window));
  out.carry.positions = last_of_groups(positions_vm.value(), window);
  return out;
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kTrj: return "trj";
    case Variant::kNjfMt: return "njf_mt";
    case Variant::kVertexOde: return "vertex_ode";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "trj") return Variant::kTrj;
  if (name == "njf_mt") return Variant::kNjfMt;
  if (name == "vertex_ode") return Variant::kVertexOde;
  throw Error("unknown model variant '" + name + "' (expected trj, njf_mt or vertex_ode)");
}

ShapeContext ShapeContext::build(const mesh::TriMesh& first_frame, const features::WksConfig& wks,
                                 const std::optional<RowMatrix>& precomputed_vertex_wks) {
  ShapeContext ctx{mesh::PoissonSystem::prefactorize(first_frame), {}, {}, {}, {}, {}};
  const auto& m = ctx.poisson.reference();
  ctx.rest_jacobians =
      mesh::compute_jacobians(m, ctx.poisson.bases(), ctx.poisson.gradient(), m.vertices).to_rows();
  ctx.face_inputs = features::face_pointnet_inputs(m);
  ctx.vertex_inputs = features::vertex_pointnet_inputs(m);
  RowMatrix vertex_wks =
      precomputed_vertex_wks ? *precomputed_vertex_wks : features::wave_kernel_signature_vertices(m, wks);
  if (vertex_wks.rows() != m.num_vertices()) throw Error("precomputed WKS does not match the mesh vertex count");
  ctx.vertex_wks = vertex_wks * static_cast<double>(m.num_vertices());
  ctx.face_wks = features::vertex_to_face(m, ctx.vertex_wks);
  return ctx;
}

double frame_time(int frame, int frames) {
  return frames > 1 ? static_cast<double>(frame) / static_cast<double>(frames - 1) : 0.0;
}

double euler_step(int frames) { return frames > 1 ? 1.0 / static_cast<double>(frames - 1) : 0.0; }

std::vector<double> window_step_times(int start, int end, int frames) {
  std::vector<double> times;
  for (int i = std::max(start, 1); i < end; ++i) times.push_back(frame_time(i - 1, frames));
  return times;
}

ModelParams::ModelParams(const ModelConfig& config, bool zero_heads) : config_(config) {
  nn::Rng rng(config_.seed);
  const int feature_width = config_.pointnet.learned_width + config_.wks.bins;
  config_.attention.input_width = token_width();

  point_net = features::PointNetLite("features", config_.pointnet, false, rng);
  posing = nn::Mlp("posing",
                   {{9 + config_.pose_width() + feature_width, config_.posing_hidden, config_.posing_hidden,
                     config_.posing_hidden, 9}},
                   zero_heads, rng);
  pose_encoder = nn::MultiHeadAttention("pose_encoder", config_.attention, false, rng);
  residual_encoder = nn::MultiHeadAttention("residual_encoder", config_.attention, false, rng);
  residual = nn::Mlp("residual", {{residual_input_width(), config_.residual_hidden, config_.residual_hidden, 9}},
                     zero_heads, rng);
  velocity = nn::Mlp("velocity",
                     {{velocity_input_width(), config_.posing_hidden, config_.posing_hidden, config_.posing_hidden, 3}},
                     zero_heads, rng);
}

int ModelParams::token_width() const { return 9 + config_.time_width(); }

int ModelParams::posing_input_width() const {
  return 9 + config_.pose_width() + config_.pointnet.learned_width + config_.wks.bins;
}

int ModelParams::residual_input_width() const {
  return 9 + 2 * config_.attention.output_width + config_.shape_width + config_.time_width();
}

int ModelParams::velocity_input_width() const {
  return features::PointNetLite::kInputWidth + config_.wks.bins + config_.pose_width() + config_.shape_width +
         config_.time_width();
}

std::vector<nn::Parameter*> ModelParams::parameters() {
  std::vector<nn::Parameter*> out;
  switch (config_.variant) {
    case Variant::kTrj:
      point_net.collect(out);
      posing.collect(out);
      pose_encoder.collect(out);
      residual_encoder.collect(out);
      residual.collect(out);
      break;
    case Variant::kNjfMt:
      point_net.collect(out);
      posing.collect(out);
      break;
    case Variant::kVertexOde:
      velocity.collect(out);
      break;
  }
  return out;
}

void ModelParams::zero_output_layers() {
  auto zero_last = [](nn::Mlp& m) {
    m.layers().back().weight().value.setZero();
    m.layers().back().bias().value.setZero();
  };
  zero_last(posing);
  zero_last(residual);
  zero_last(velocity);
  for (nn::MultiHeadAttention* enc : {&pose_encoder, &residual_encoder}) {
    std::vector<nn::Parameter*> p;
    enc->collect(p);
    p[p.size() - 2]->value.setZero();
    p[p.size() - 1]->value.setZero();
  }
  std::vector<nn::Parameter*> p;
  point_net.collect(p);
  p[p.size() - 2]->value.setZero();
  p[p.size() - 1]->value.setZero();
}

Var face_features(const ModelParams& params, nn::Tape& tape, const ShapeContext& ctx) {
  return features::assemble_face_features(params.point_net.forward(tape, ctx.face_inputs), ctx.face_wks);
}

Var posing_forward(const ModelParams& params, const Var& rest_jacobians, const RowMatrix& poses,
                   const Var& features) {
  if (features.rows() != rest_jacobians.rows()) {
    throw Error("face features have " + std::to_string(features.rows()) + " rows but the mesh has " +
                std::to_string(rest_jacobians.rows()) + " faces");
  }
  if (poses.cols() != params.config().pose_width()) {
    throw nn::ShapeError("pose width " + std::to_string(poses.cols()) + " does not match " +
                         std::to_string(params.config().pose_width()));
  }
  nn::Tape& tape = rest_jacobians.tape();
  const int faces = static_cast<int>(rest_jacobians.rows());
  const int frames = static_cast<int>(poses.rows());
  const std::vector<int> per_face = repeat_each(faces, frames);
  const Var rest_rows = nn::gather_rows(rest_jacobians, per_face);
  const Var parts[] = {rest_rows, nn::gather_rows(tape.constant(poses), tile(frames, faces)),
                       nn::gather_rows(features, per_face)};
  return nn::add(rest_rows, params.posing.forward(nn::concat_cols(parts)));
}

Var encode_pose_window(const ModelParams& params, const Var& posed_block, const RowMatrix& time_codes) {
  return encode_window(params.pose_encoder, posed_block, time_codes);
}

Var encode_residual_window(const ModelParams& params, const Var& residual_block, const RowMatrix& time_codes) {
  return encode_window(params.residual_encoder, residual_block, time_codes);
}

Var residual_derivative(const ModelParams& params, const Var& rest_jacobians, const Var& pose_encoding,
                        const Var& residual_encoding, const Eigen::RowVectorXd& beta, std::span<const double> times) {
  const ModelConfig& cfg = params.config();
  if (beta.size() != cfg.shape_width) {
    throw nn::ShapeError("shape signature width " + std::to_string(beta.size()) + " does not match " +
                         std::to_string(cfg.shape_width));
  }
  nn::Tape& tape = rest_jacobians.tape();
  const int faces = static_cast<int>(rest_jacobians.rows());
  const int steps = static_cast<int>(times.size());
  const std::vector<int> per_face = repeat_each(faces, steps);
  const std::vector<int> per_step = tile(steps, faces);
  RowMatrix beta_row = beta;
  const Var parts[] = {
      nn::gather_rows(rest_jacobians, per_face),
      nn::gather_rows(pose_encoding, per_face),
      nn::gather_rows(residual_encoding, per_face),
      nn::gather_rows(tape.constant(beta_row), std::vector<int>(per_step.size(), 0)),
      nn::gather_rows(tape.constant(time_codes(times, cfg.time_bands)), per_step),
  };
  return params.residual.forward(nn::concat_cols(parts));
}

Var euler_integrate_window(const Var& rates, const Var& initial, Eigen::Index steps, double h, bool starts_sequence) {
  return nn::euler_accumulate(rates, initial, steps, h, starts_sequence);
}

Var compose_jacobians(const Var& posed, const Var& residual) { return nn::add(posed, residual); }

Var poisson_solve(const mesh::PoissonSystem& system, const Var& jacobian_rows) {
  const mesh::PoissonSystem* sys = &system;
  const Var in[] = {jacobian_rows};
  return jacobian_rows.tape().record(system.solve_rows(jacobian_rows.value()), in,
                                     [sys, jacobian_rows](nn::Tape& t, const nn::Matrix& g) {
                                       t.accumulate(jacobian_rows, sys->adjoint_rows(g));
                                     });
}

std::vector<int> face_major_to_frame_major(int faces, int frames) {
  std::vector<int> idx(static_cast<size_t>(faces) * frames);
  for (int k = 0; k < frames; ++k) {
    for (int f = 0; f < faces; ++f) idx[static_cast<size_t>(k) * faces + f] = f * frames + k;
  }
  return idx;
}

WindowOutput forward_window(const ModelParams& params, nn::Tape& tape, const ShapeContext& ctx,
                            const MotionInput& motion, int start, int end, const WindowCarry& carry) {
  const ModelConfig& cfg = params.config();
  const int frames = motion.frames();
  if (start < 0 || end > frames || start >= end) {
    throw Error("window [" + std::to_string(start) + ", " + std::to_string(end) + ") is invalid for " +
                std::to_string(frames) + " frames");
  }
  if (motion.angles.cols() != cfg.pose_width()) {
    throw nn::ShapeError("motion has " + std::to_string(motion.angles.cols()) + " angle columns, model expects " +
                         std::to_string(cfg.pose_width()));
  }
  if (cfg.variant == Variant::kVertexOde) return forward_vertex_window(params, tape, ctx, motion, start, end, carry);

  const int faces = ctx.num_faces();
  const int window = end - start;
  const Var rest = tape.constant(ctx.rest_jacobians);
  const Var features = face_features(params, tape, ctx);
  const Var posed = posing_forward(params, rest, motion.angles.middleRows(start, window), features);

  WindowOutput out;
  Var jacobians = posed;
  if (cfg.variant == Variant::kTrj) {
    std::vector<double> times(static_cast<size_t>(window));
    for (int k = 0; k < window; ++k) times[static_cast<size_t>(k)] = frame_time(start + k, frames);
    const Var pose_code = encode_pose_window(params, posed, time_codes(times, cfg.time_bands));

    Var residual_code;
    if (carry.residual_block.size() == 0) {
      residual_code = encode_residual_window(params, tape.constant(RowMatrix::Zero(faces, 9)),
                                             RowMatrix::Zero(1, cfg.time_width()));
    } else {
      residual_code = encode_residual_window(params, tape.constant(carry.residual_block),
                                             time_codes(carry.block_times, cfg.time_bands));
    }

    const std::vector<double> step_times = window_step_times(start, end, frames);
    const auto steps = static_cast<Eigen::Index>(step_times.size());
    const Var rates = steps > 0 ? residual_derivative(params, rest, pose_code, residual_code, motion.beta, step_times)
                                : tape.constant(RowMatrix(0, 9));
    const RowMatrix initial = carry.residual.size() ? carry.residual : RowMatrix(RowMatrix::Zero(faces, 9));
    const Var residuals = euler_integrate_window(rates, tape.constant(initial), steps, euler_step(frames), start == 0);
    if (!residuals.value().allFinite()) {
      Eigen::Index bad_row = 0;
      for (Eigen::Index r = 0; r < residuals.rows(); ++r) {
        if (!residuals.value().row(r).allFinite()) {
          bad_row = r;
          break;
        }
      }
      throw Error("residual integration produced a non-finite value at frame " +
                  std::to_string(start + bad_row % window));
    }
    jacobians = compose_jacobians(posed, residuals);
    out.carry.residual = last_of_groups(residuals.value(), window);
    out.carry.residual_block = residuals.value();
    out.carry.block_times = times;
  }

  out.jacobians = nn::gather_rows(jacobians, face_major_to_frame_major(faces, window));
  out.positions = poisson_solve(ctx.poisson, out.jacobians);
  return out;
}

SequencePrediction sequence_forward(const ModelParams& params, const ShapeContext& ctx, const MotionInput& motion) {
  const int frames = motion.frames();
  const int window = params.config().window;
  if (window < 1) throw Error("window length must be positive");
  SequencePrediction pred;
  pred.frames.reserve(static_cast<size_t>(frames));
  const bool has_jacobians = params.config().variant != Variant::kVertexOde;
  const int n = ctx.num_vertices();
  const int faces = ctx.num_faces();

  WindowCarry carry;
  nn::Tape tape;
  for (int start = 0; start < frames; start += window) {
    const int end = std::min(frames, start + window);
    WindowOutput out = forward_window(params, tape, ctx, motion, start, end, carry);
    for (int k = 0; k < end - start; ++k) {
      pred.frames.emplace_back(out.positions.value().middleRows(static_cast<Eigen::Index>(k) * n, n));
      if (has_jacobians) pred.jacobians.emplace_back(out.jacobians.value().middleRows(static_cast<Eigen::Index>(k) * faces, faces));
    }
    carry = std::move(out.carry);
    tape.clear();
  }
  return pred;
}

std::vector<Positions> apply_global_transform(const std::vector<Positions>& frames,
                                              const std::vector<RigidTransform>& transforms, double height_scale) {
  if (frames.size() != transforms.size()) {
    throw Error("got " + std::to_string(transforms.size()) + " global transforms for " +
                std::to_string(frames.size()) + " frames");
  }
  if (!(height_scale > 0.0)) throw Error("height scale must be positive");
  std::vector<Positions> out;
  out.reserve(frames.size());
  for (size_t i = 0; i < frames.size(); ++i) {
    const auto& R = transforms[i].rotation;
    if (std::abs(R.determinant() - 1.0) > 1e-6 || !(R.transpose() * R).isIdentity(1e-6)) {
      throw Error("global transform of frame " + std::to_string(i) + " is not a rotation");
    }
    Positions p = frames[i] * R.transpose();
    p.rowwise() += (height_scale * transforms[i].translation).transpose();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace trj::motion
