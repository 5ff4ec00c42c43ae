#pragma once

#include "trj/features/features.hpp"
#include "trj/mesh/poisson.hpp"
#include "trj/nn/layers.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace trj::motion {

using nn::Var;

inline constexpr int kDefaultWindow = 32;
inline constexpr int kDefaultShapeWidth = 16;

/// Which network stack a model runs.
enum class Variant {
  kTrj,        // posing + attention encoders + residual ODE + Poisson
  kNjfMt,      // posing + Poisson, every frame independent
  kVertexOde,  // per-vertex velocity ODE, no Jacobians
};

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::kTrj;
  int joints = 12;
  int shape_width = kDefaultShapeWidth;
  int window = kDefaultWindow;
  int posing_hidden = 128;
  int residual_hidden = 128;
  int time_bands = nn::kTimeBands;
  features::PointNetConfig pointnet;
  features::WksConfig wks;
  nn::AttentionSpec attention;  // input_width filled in from the Jacobian and time widths
  std::uint64_t seed = 1;

  int pose_width() const { return 3 * joints; }
  int time_width() const { return 2 * time_bands; }
};

/// Everything derived from the first-frame mesh X_0; shared by all frames and windows.
struct ShapeContext {
  mesh::PoissonSystem poisson;
  RowMatrix rest_jacobians;   // F×9, the first-frame Jacobians in their own local bases
  RowMatrix face_inputs;      // F×6 point-net inputs
  RowMatrix face_wks;         // F×bins
  RowMatrix vertex_inputs;    // N×6
  RowMatrix vertex_wks;       // N×bins (unit mean)

  static ShapeContext build(const mesh::TriMesh& first_frame, const features::WksConfig& wks = {},
                            const std::optional<RowMatrix>& precomputed_vertex_wks = std::nullopt);

  const mesh::TriMesh& mesh() const { return poisson.reference(); }
  int num_faces() const { return poisson.num_faces(); }
  int num_vertices() const { return poisson.num_vertices(); }
};

/// Joint-angle conditioning for a whole sequence.
struct MotionInput {
  RowMatrix angles;        // frames × 3·joints, relative Euler angles (radians)
  Eigen::RowVectorXd beta; // shape signature, zero-padded to the model's shape width

  int frames() const { return static_cast<int>(angles.rows()); }
};

/// Sequence-normalized time of frame i and the Euler step.
double frame_time(int frame, int frames);
double euler_step(int frames);

/// Values carried from one window to the next. Detached from any tape.
struct WindowCarry {
  RowMatrix residual;        // F×9 last integrated residual (empty before the first window)
  RowMatrix residual_block;  // (F·T')×9 previous window residuals, face-major; empty for the first window
  std::vector<double> block_times;
  RowMatrix positions;       // N×3 last positions (vertex ODE)
};

struct WindowOutput {
  Var positions;  // (T·N)×3, frame-major
  Var jacobians;  // (T·F)×9, frame-major; invalid for the vertex ODE
  WindowCarry carry;
};

/// Trainable weights of one model. Copying yields an independent snapshot.
class ModelParams {
 public:
  ModelParams() = default;
  /// `zero_heads` zero-initializes the final layer of f_P and f_R (identity deformation at start).
  explicit ModelParams(const ModelConfig& config, bool zero_heads = true);

  const ModelConfig& config() const { return config_; }
  std::vector<nn::Parameter*> parameters();
  /// Zeroes the output layers of every network (f_P, f_R, both encoders, point net, velocity net).
  void zero_output_layers();

  features::PointNetLite point_net;
  nn::Mlp posing;              // f_P
  nn::Mlp residual;            // f_R
  nn::MultiHeadAttention pose_encoder;      // A^P
  nn::MultiHeadAttention residual_encoder;  // A^R
  nn::Mlp velocity;            // vertex-ODE baseline

  int posing_input_width() const;
  int residual_input_width() const;
  int velocity_input_width() const;
  int token_width() const;

 private:
  ModelConfig config_;
};

/// Per-face descriptor C = [point-net features | WKS].
Var face_features(const ModelParams& params, nn::Tape& tape, const ShapeContext& ctx);

/// J^P rows for `frames` poses: rows are face-major (face·T + k). Returns J^P_0 + f_P(J^P_0, M_t, C).
Var posing_forward(const ModelParams& params, const Var& rest_jacobians, const RowMatrix& poses, const Var& features);

/// Face-major window of Jacobians plus per-token time encodings → one encoding per face.
Var encode_pose_window(const ModelParams& params, const Var& posed_block, const RowMatrix& time_codes);
Var encode_residual_window(const ModelParams& params, const Var& residual_block, const RowMatrix& time_codes);

/// dJ^R/dt for each face at each of the given times: rows face-major (face·S + s).
Var residual_derivative(const ModelParams& params, const Var& rest_jacobians, const Var& pose_encoding,
                        const Var& residual_encoding, const Eigen::RowVectorXd& beta, std::span<const double> times);

/// J = J^P + J^R.
Var compose_jacobians(const Var& posed, const Var& residual);

/// Differentiable Poisson integration of frame-major local Jacobian rows.
Var poisson_solve(const mesh::PoissonSystem& system, const Var& jacobian_rows);

/// Rows [f·T + k] → [k·F + f].
std::vector<int> face_major_to_frame_major(int faces, int frames);

/// Forward pass for frames [start, end) of a sequence.
WindowOutput forward_window(const ModelParams& params, nn::Tape& tape, const ShapeContext& ctx,
                            const MotionInput& motion, int start, int end, const WindowCarry& carry);

struct SequencePrediction {
  std::vector<Positions> frames;
  std::vector<RowMatrix> jacobians;  // F×9 local rows per frame; empty for the vertex ODE
};

/// Whole-sequence inference in consecutive windows.
SequencePrediction sequence_forward(const ModelParams& params, const ShapeContext& ctx, const MotionInput& motion);

/// Times at which the rate is sampled for frames [start, end): frame i > 0 is reached
/// by one explicit Euler step from t_{i-1}. Frame 0 takes no step (J^R_0 = 0).
std::vector<double> window_step_times(int start, int end, int frames);

/// Explicit Euler over a window: rates are face-major (face·S + s) rows sampled at
/// `window_step_times`; `initial` is the carried residual (F×9). With `starts_sequence`
/// the initial value itself is emitted as the first frame.
Var euler_integrate_window(const Var& rates, const Var& initial, Eigen::Index steps, double h, bool starts_sequence);

/// One rigid transform per frame: x' = R x + scale·t.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

std::vector<Positions> apply_global_transform(const std::vector<Positions>& frames,
                                              const std::vector<RigidTransform>& transforms, double height_scale);

}  // namespace trj::motion
