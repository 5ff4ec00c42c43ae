#include "test_support.hpp"

#include "trj/mesh/primitives.hpp"
#include "trj/motion/model.hpp"
#include "trj/nn/gradcheck.hpp"
#include "trj/train/losses.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>

using namespace trj;
using namespace trj::motion;

namespace {

MotionInput random_motion(int frames, int joints, std::uint64_t seed, double amp = 0.3) {
  nn::Rng rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  MotionInput m;
  m.angles.resize(frames, 3 * joints);
  for (Eigen::Index i = 0; i < m.angles.size(); ++i) m.angles.data()[i] = u(rng);
  m.beta = Eigen::RowVectorXd::Zero(kDefaultShapeWidth);
  for (int i = 0; i < 9; ++i) m.beta(i) = u(rng);
  return m;
}

ModelConfig small_config(Variant v = Variant::kTrj, std::uint64_t seed = 3) {
  ModelConfig c;
  c.variant = v;
  c.seed = seed;
  return c;
}

const mesh::TriMesh& arm() {
  static const mesh::TriMesh m = mesh::capped_cylinder(8, 3, 0.2, 1.0);
  return m;
}

const ShapeContext& arm_context() {
  static const ShapeContext ctx = ShapeContext::build(arm());
  return ctx;
}

/// Gradient check on a network given a loss built from the current parameter values.
double grad_error(const std::function<nn::Var(nn::Tape&)>& loss, std::vector<nn::Parameter*> params) {
  nn::GradCheckOptions opts;
  opts.samples_per_parameter = 12;
  return nn::check_gradients(loss, params, opts).worst_relative_error;
}

}  // namespace

TEST_CASE("frame time and Euler step") {
  CHECK(frame_time(0, 1) == 0.0);
  CHECK(euler_step(1) == 0.0);
  CHECK(frame_time(31, 32) == doctest::Approx(1.0));
  CHECK(euler_step(33) == doctest::Approx(1.0 / 32.0));
  const std::vector<double> first = window_step_times(0, 4, 9);
  REQUIRE(first.size() == 3);
  CHECK(first[0] == 0.0);
  CHECK(first[2] == doctest::Approx(2.0 / 8.0));
  const std::vector<double> later = window_step_times(4, 8, 9);
  REQUIRE(later.size() == 4);
  CHECK(later[0] == doctest::Approx(3.0 / 8.0));
}

TEST_CASE("posing: zero head gives the rest Jacobians, shapes, gradients") {
  ModelParams params(small_config());
  const ShapeContext& ctx = arm_context();
  const MotionInput motion = random_motion(5, 12, 1);
  {
    nn::Tape tape;
    const nn::Var rest = tape.constant(ctx.rest_jacobians);
    const nn::Var posed = posing_forward(params, rest, motion.angles, face_features(params, tape, ctx));
    REQUIRE(posed.rows() == 5 * ctx.num_faces());
    REQUIRE(posed.cols() == 9);
    for (int f = 0; f < ctx.num_faces(); ++f) {
      for (int k = 0; k < 5; ++k) CHECK((posed.value().row(f * 5 + k) - ctx.rest_jacobians.row(f)).norm() == 0.0);
    }
  }
  ModelParams random(small_config(), false);
  std::vector<nn::Parameter*> ps;
  random.posing.collect(ps);
  random.point_net.collect(ps);
  const RowMatrix target = RowMatrix::Random(5 * ctx.num_faces(), 9);
  auto loss = [&](nn::Tape& tape) {
    const nn::Var rest = tape.constant(ctx.rest_jacobians);
    const nn::Var posed = posing_forward(random, rest, motion.angles, face_features(random, tape, ctx));
    return nn::mean(nn::mul(nn::sub(posed, tape.constant(target)), nn::sub(posed, tape.constant(target))));
  };
  CHECK(grad_error(loss, ps) < 1e-4);
}

TEST_CASE("encoders: widths, one-token value path, time awareness, determinism") {
  ModelParams params(small_config(Variant::kTrj, 5), false);
  const int faces = 4;
  nn::Rng rng(2);
  auto block = [&](int steps) {
    RowMatrix b(faces * steps, 9);
    std::normal_distribution<double> n;
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = n(rng);
    return b;
  };
  auto codes = [](int steps) {
    RowMatrix c(steps, 2 * nn::kTimeBands);
    for (int s = 0; s < steps; ++s) c.row(s) = nn::positional_encoding(0.1 * s + 0.05);
    return c;
  };
  nn::Tape tape;
  for (int steps : {1, 8, 32}) {
    const nn::Var e = encode_pose_window(params, tape.constant(block(steps)), codes(steps));
    CHECK(e.rows() == faces);
    CHECK(e.cols() == 32);
    CHECK(encode_residual_window(params, tape.constant(block(steps)), codes(steps)).cols() == 32);
  }

  // swapping two time steps (with their codes) inside each face's token set changes the result
  const RowMatrix b = block(6);
  const RowMatrix c = codes(6);
  RowMatrix b_swapped = b;
  for (int f = 0; f < faces; ++f) b_swapped.row(f * 6 + 1).swap(b_swapped.row(f * 6 + 4));
  RowMatrix c_swapped = c;
  c_swapped.row(1).swap(c_swapped.row(4));
  const RowMatrix e0 = encode_pose_window(params, tape.constant(b), c).value();
  const RowMatrix e_both = encode_pose_window(params, tape.constant(b_swapped), c_swapped).value();
  const RowMatrix e_data = encode_pose_window(params, tape.constant(b_swapped), c).value();
  CHECK((e0 - e_both).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((e0 - e_data).cwiseAbs().maxCoeff() > 1e-6);
  CHECK((e0 - encode_pose_window(params, tape.constant(b), c).value()).norm() == 0.0);

  ModelParams zeroed(small_config(Variant::kTrj, 5), false);
  zeroed.zero_output_layers();
  const RowMatrix z = encode_residual_window(zeroed, tape.constant(RowMatrix::Zero(faces * 3, 9)), codes(3)).value();
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoders: gradients") {
  ModelParams params(small_config(Variant::kTrj, 6), false);
  const RowMatrix b = RowMatrix::Random(3 * 5, 9);
  RowMatrix c(5, 2 * nn::kTimeBands);
  for (int s = 0; s < 5; ++s) c.row(s) = nn::positional_encoding(0.2 * s);
  for (auto* enc : {&params.pose_encoder, &params.residual_encoder}) {
    std::vector<nn::Parameter*> ps;
    enc->collect(ps);
    auto loss = [&](nn::Tape& tape) {
      const nn::Var e = enc == &params.pose_encoder ? encode_pose_window(params, tape.constant(b), c)
                                                    : encode_residual_window(params, tape.constant(b), c);
      return nn::sum_squares(e);
    };
    CHECK(grad_error(loss, ps) < 1e-4);
  }
}

TEST_CASE("residual derivative: zero head, beta conditioning, gradients") {
  const ShapeContext& ctx = arm_context();
  const int faces = ctx.num_faces();
  const std::vector<double> times{0.0, 0.25, 0.5};
  const RowMatrix pose_code = RowMatrix::Random(faces, 32);
  const RowMatrix res_code = RowMatrix::Random(faces, 32);
  Eigen::RowVectorXd beta_a = Eigen::RowVectorXd::Zero(16), beta_b = beta_a;
  beta_b(0) = 0.3;
  beta_b(4) = -0.2;

  ModelParams zero(small_config());
  nn::Tape tape;
  const nn::Var rest = tape.constant(ctx.rest_jacobians);
  const RowMatrix r0 =
      residual_derivative(zero, rest, tape.constant(pose_code), tape.constant(res_code), beta_a, times).value();
  CHECK(r0.rows() == faces * 3);
  CHECK(r0.cwiseAbs().maxCoeff() == 0.0);

  ModelParams random(small_config(Variant::kTrj, 9), false);
  const RowMatrix ra =
      residual_derivative(random, rest, tape.constant(pose_code), tape.constant(res_code), beta_a, times).value();
  const RowMatrix rb =
      residual_derivative(random, rest, tape.constant(pose_code), tape.constant(res_code), beta_b, times).value();
  CHECK((ra - rb).cwiseAbs().maxCoeff() > 1e-6);
  CHECK_THROWS_AS(residual_derivative(random, rest, tape.constant(pose_code), tape.constant(res_code),
                                      Eigen::RowVectorXd::Zero(9), times),
                  nn::ShapeError);

  std::vector<nn::Parameter*> ps;
  random.residual.collect(ps);
  auto loss = [&](nn::Tape& t) {
    return nn::sum_squares(residual_derivative(random, t.constant(ctx.rest_jacobians), t.constant(pose_code),
                                               t.constant(res_code), beta_b, times));
  };
  CHECK(grad_error(loss, ps) < 1e-4);
}

TEST_CASE("euler: zero rate, constant rate, first-order convergence") {
  nn::Tape tape;
  const int faces = 3;
  auto integrate = [&](const std::function<RowMatrix(double)>& rate, int frames) {
    const std::vector<double> times = window_step_times(0, frames, frames);
    const auto steps = static_cast<Eigen::Index>(times.size());
    RowMatrix rates(faces * steps, 9);
    for (int f = 0; f < faces; ++f) {
      for (Eigen::Index s = 0; s < steps; ++s) rates.row(f * steps + s) = rate(times[static_cast<size_t>(s)]);
    }
    return euler_integrate_window(tape.constant(rates), tape.constant(RowMatrix::Zero(faces, 9)), steps,
                                  euler_step(frames), true)
        .value();
  };
  const RowMatrix a = RowMatrix::Random(1, 9);
  const RowMatrix zero = integrate([](double) { return RowMatrix(RowMatrix::Zero(1, 9)); }, 17);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

  const RowMatrix constant = integrate([&](double) { return a; }, 17);
  for (int f = 0; f < faces; ++f) {
    for (int k = 0; k < 17; ++k) {
      CHECK((constant.row(f * 17 + k) - a * frame_time(k, 17)).cwiseAbs().maxCoeff() < 1e-14);
    }
  }

  std::vector<double> errors;
  for (int inv_h : {32, 64, 128}) {
    const RowMatrix r = integrate([&](double t) { return RowMatrix(a * t); }, inv_h + 1);
    errors.push_back((r.row(inv_h) - 0.5 * a).cwiseAbs().maxCoeff());
  }
  CHECK(errors[0] / errors[1] == doctest::Approx(2.0).epsilon(0.2));
  CHECK(errors[1] / errors[2] == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("compose jacobians: additive and homogeneous") {
  nn::Tape tape;
  const RowMatrix p = RowMatrix::Random(6, 9), r = RowMatrix::Random(6, 9);
  CHECK((compose_jacobians(tape.constant(p), tape.constant(RowMatrix::Zero(6, 9))).value() - p).norm() == 0.0);
  const RowMatrix lhs = compose_jacobians(tape.constant(2.5 * p), tape.constant(2.5 * r)).value();
  CHECK((lhs - 2.5 * compose_jacobians(tape.constant(p), tape.constant(r)).value()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS(compose_jacobians(tape.constant(p), tape.constant(RowMatrix::Zero(5, 9))));
}

TEST_CASE("sequence forward: zero model reproduces the first frame for any length") {
  const ShapeContext& ctx = arm_context();
  for (Variant v : {Variant::kTrj, Variant::kNjfMt, Variant::kVertexOde}) {
    ModelParams params(small_config(v), false);
    params.zero_output_layers();
    for (int frames : {1, 32, 100}) {
      const SequencePrediction pred = sequence_forward(params, ctx, random_motion(frames, 12, 4));
      REQUIRE(static_cast<int>(pred.frames.size()) == frames);
      double worst = 0.0;
      for (const auto& x : pred.frames) worst = std::max(worst, (x - arm().vertices).cwiseAbs().maxCoeff());
      CHECK(worst < 1e-6);
      CHECK(pred.jacobians.size() == (v == Variant::kVertexOde ? 0u : static_cast<size_t>(frames)));
    }
  }
}

TEST_CASE("sequence forward: TRJ with a zero residual head equals NJF(M_t)") {
  const ShapeContext& ctx = arm_context();
  ModelParams trj(small_config(Variant::kTrj, 12), false);
  trj.residual.layers().back().weight().value.setZero();
  trj.residual.layers().back().bias().value.setZero();
  const ModelParams njf(small_config(Variant::kNjfMt, 12), false);
  const MotionInput motion = random_motion(40, 12, 8);
  const SequencePrediction a = sequence_forward(trj, ctx, motion);
  const SequencePrediction b = sequence_forward(njf, ctx, motion);
  double worst = 0.0;
  for (size_t i = 0; i < a.frames.size(); ++i) worst = std::max(worst, (a.frames[i] - b.frames[i]).cwiseAbs().maxCoeff());
  CHECK(worst == 0.0);
}

TEST_CASE("sequence forward: windows chain and differ from one long window") {
  const ShapeContext& ctx = arm_context();
  ModelConfig cfg = small_config(Variant::kTrj, 13);
  ModelParams params(cfg, false);
  const MotionInput motion = random_motion(20, 12, 9);
  const SequencePrediction pred = sequence_forward(params, ctx, motion);
  nn::Tape tape;
  WindowCarry carry;
  const WindowOutput w0 = forward_window(params, tape, ctx, motion, 0, 8, carry);
  const WindowOutput w1 = forward_window(params, tape, ctx, motion, 8, 16, w0.carry);
  cfg.window = 8;
  ModelParams params8(cfg, false);
  const SequencePrediction pred8 = sequence_forward(params8, ctx, motion);
  const int n = ctx.num_vertices();
  CHECK((w1.positions.value().middleRows(0, n) - pred8.frames[8]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((w0.positions.value().middleRows(0, n) - pred.frames[0]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS(forward_window(params, tape, ctx, motion, 5, 3, carry));
}

TEST_CASE("end-to-end gradient through the Poisson solve on a 20-face mesh") {
  const mesh::TriMesh m = mesh::icosphere(0);
  REQUIRE(m.num_faces() == 20);
  const ShapeContext ctx = ShapeContext::build(m);
  ModelConfig cfg = small_config(Variant::kTrj, 21);
  ModelParams params(cfg, false);
  // non-zero biases keep the zero-token first window away from ReLU kinks
  nn::Rng noise(31);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (auto* p : params.parameters()) {
    p->value *= 0.5;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += jitter(noise);
  }
  const MotionInput motion = random_motion(6, 12, 10);
  const RowMatrix target_x = RowMatrix::Random(6 * ctx.num_vertices(), 3) * 0.1;
  const RowMatrix target_j = RowMatrix::Random(6 * ctx.num_faces(), 9) * 0.1;
  // the carry between windows is detached, so it enters the second window as a fixed input
  WindowCarry seam;
  {
    nn::Tape tape;
    seam = forward_window(params, tape, ctx, motion, 0, 3, WindowCarry{}).carry;
  }
  auto loss = [&](nn::Tape& tape) {
    const WindowOutput w0 = forward_window(params, tape, ctx, motion, 0, 3, WindowCarry{});
    const WindowOutput w1 = forward_window(params, tape, ctx, motion, 3, 6, seam);
    const nn::Var xs[] = {w0.positions, w1.positions};
    const nn::Var js[] = {w0.jacobians, w1.jacobians};
    return train::window_losses(nn::concat_rows(xs), nn::concat_rows(js), target_x, target_j, 6).total;
  };
  nn::GradCheckOptions opts;
  opts.samples_per_parameter = 8;
  const auto r = nn::check_gradients(loss, params.parameters(), opts);
  INFO("worst parameter: " << r.worst_parameter);
  CHECK(r.worst_relative_error < 1e-3);

  ModelParams vode(small_config(Variant::kVertexOde, 22), false);
  auto vloss = [&](nn::Tape& tape) {
    const WindowOutput w = forward_window(vode, tape, ctx, motion, 0, 6, WindowCarry{});
    return train::window_losses(w.positions, nn::Var{}, target_x, target_j, 6).total;
  };
  CHECK(nn::check_gradients(vloss, vode.parameters(), opts).worst_relative_error < 1e-3);
}

TEST_CASE("global transform: identity, translation, height scaling") {
  const std::vector<Positions> frames{testing::bumpy_grid(3, 3, 1).vertices, testing::bumpy_grid(3, 3, 2).vertices};
  std::vector<RigidTransform> id(2);
  const auto same = apply_global_transform(frames, id, 1.0);
  for (size_t i = 0; i < 2; ++i) CHECK((same[i] - frames[i]).norm() == 0.0);

  std::vector<RigidTransform> shift(2);
  shift[0].translation = Eigen::Vector3d(0.5, 0, 0);
  shift[1].translation = Eigen::Vector3d(1.0, 0.25, -2);
  const auto moved = apply_global_transform(frames, shift, 1.0);
  for (size_t i = 0; i < 2; ++i) {
    const Positions back = moved[i].rowwise() - shift[i].translation.transpose();
    CHECK((back - frames[i]).cwiseAbs().maxCoeff() < 1e-15);
  }
  const auto doubled = apply_global_transform(frames, shift, 2.0);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(((doubled[i] - frames[i]).rowwise() - 2.0 * shift[i].translation.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  }

  std::vector<RigidTransform> rot(2);
  rot[1].rotation = Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitY()).toRotationMatrix();
  const auto turned = apply_global_transform(frames, rot, 1.0);
  CHECK((turned[1] - frames[1] * rot[1].rotation.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS(apply_global_transform(frames, std::vector<RigidTransform>(1), 1.0));
}
