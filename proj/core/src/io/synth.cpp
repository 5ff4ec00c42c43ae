#include "trj/io/synth.hpp"

#include "trj/io/obj.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

namespace trj::io {

namespace {

constexpr double kPi = std::numbers::pi;

enum Joint { kPelvis, kChest, kNeck, kHead, kLShoulder, kLElbow, kRShoulder, kRElbow, kLHip, kLKnee, kRHip, kRKnee };

const std::array<int, kSynthJoints> kParents = {-1, kPelvis, kChest, kNeck, kChest, kLShoulder,
                                                 kChest, kRShoulder, kPelvis, kLHip, kPelvis, kRHip};
const std::array<const char*, kSynthJoints> kNames = {"pelvis", "chest", "neck", "head",
                                                       "l_shoulder", "l_elbow", "r_shoulder", "r_elbow",
                                                       "l_hip", "l_knee", "r_hip", "r_knee"};

/// Absolute rest geometry of the default body scaled by the shape parameters.
struct BodyLayout {
  double width, depth, height, bottom;
  double upper_arm, forearm, arm_radius;
  double thigh, shin, leg_radius;
  double neck, head, head_radius;
  std::array<Eigen::Vector3d, kSynthJoints> joints;
  std::array<Eigen::Vector3d, kSynthJoints> bone_ends;
  std::array<double, kSynthJoints> bone_radii;
};

BodyLayout layout_for(const ShapeParams& s) {
  s.validate();
  BodyLayout b{};
  b.width = 0.24 * s.torso_width;
  b.depth = 0.14 * s.torso_depth;
  b.height = 0.30 * s.torso_height;
  b.upper_arm = 0.21 * s.arm_length;
  b.forearm = 0.21 * s.arm_length;
  b.arm_radius = 0.035 * s.arm_radius;
  b.thigh = 0.23 * s.leg_length;
  b.shin = 0.23 * s.leg_length;
  b.leg_radius = 0.045 * s.leg_radius;
  b.neck = 0.06 * s.neck_length;
  b.head = 0.16 * s.head_size;
  b.head_radius = 0.07 * s.head_size;
  b.bottom = b.thigh + b.shin + 0.02;

  const double y0 = b.bottom, w = b.width, h = b.height;
  const Eigen::Vector3d x = Eigen::Vector3d::UnitX(), y = Eigen::Vector3d::UnitY();
  auto& j = b.joints;
  j[kPelvis] = {0.0, y0 + 0.15 * h, 0.0};
  j[kChest] = {0.0, y0 + 0.6 * h, 0.0};
  j[kNeck] = {0.0, y0 + h, 0.0};
  j[kHead] = j[kNeck] + b.neck * y;
  j[kLShoulder] = {0.5 * w, y0 + h * 5.0 / 6.0, 0.0};
  j[kLElbow] = j[kLShoulder] + b.upper_arm * x;
  j[kRShoulder] = {-0.5 * w, y0 + h * 5.0 / 6.0, 0.0};
  j[kRElbow] = j[kRShoulder] - b.upper_arm * x;
  j[kLHip] = {w / 3.0, y0, 0.0};
  j[kLKnee] = j[kLHip] - b.thigh * y;
  j[kRHip] = {-w / 3.0, y0, 0.0};
  j[kRKnee] = j[kRHip] - b.thigh * y;

  auto& e = b.bone_ends;
  e[kPelvis] = j[kChest];
  e[kChest] = j[kNeck];
  e[kNeck] = j[kHead];
  e[kHead] = j[kHead] + b.head * y;
  e[kLShoulder] = j[kLElbow];
  e[kLElbow] = j[kLElbow] + b.forearm * x;
  e[kRShoulder] = j[kRElbow];
  e[kRElbow] = j[kRElbow] - b.forearm * x;
  e[kLHip] = j[kLKnee];
  e[kLKnee] = j[kLKnee] - b.shin * y;
  e[kRHip] = j[kRKnee];
  e[kRKnee] = j[kRKnee] - b.shin * y;

  b.bone_radii = {0.5 * w,      0.5 * w,      0.03,         b.head_radius, b.arm_radius, b.arm_radius,
                  b.arm_radius, b.arm_radius, b.leg_radius, b.leg_radius,  b.leg_radius, b.leg_radius};
  return b;
}

struct Ring {
  Eigen::Vector3d center;
  Eigen::Vector3d direction;
  double half_size;
};

class MeshBuilder {
 public:
  int add(const Eigen::Vector3d& p) {
    verts_.push_back(p);
    return static_cast<int>(verts_.size()) - 1;
  }
  void quad(int a, int b, int c, int d) {
    tris_.push_back({a, b, c});
    tris_.push_back({a, c, d});
  }
  const Eigen::Vector3d& vertex(int i) const { return verts_[static_cast<size_t>(i)]; }

  /// Pushes a chain of square rings out of the quad (q0..q3, counter-clockwise seen from outside).
  void extrude(const std::array<int, 4>& q, const std::vector<Ring>& rings) {
    Eigen::Vector3d mid = Eigen::Vector3d::Zero();
    for (int v : q) mid += vertex(v) / 4.0;
    std::array<int, 4> prev = q;
    for (const auto& r : rings) {
      const Eigen::Vector3d d = r.direction.normalized();
      std::array<int, 4> next{};
      for (int k = 0; k < 4; ++k) {
        Eigen::Vector3d off = vertex(q[static_cast<size_t>(k)]) - mid;
        off -= off.dot(d) * d;
        next[static_cast<size_t>(k)] = add(r.center + std::sqrt(2.0) * r.half_size * off.normalized());
      }
      for (int k = 0; k < 4; ++k) {
        const auto k0 = static_cast<size_t>(k), k1 = static_cast<size_t>((k + 1) % 4);
        quad(prev[k0], prev[k1], next[k1], next[k0]);
      }
      prev = next;
    }
    quad(prev[0], prev[1], prev[2], prev[3]);
  }

  mesh::TriMesh finish() const {
    mesh::TriMesh m;
    m.vertices.resize(static_cast<Eigen::Index>(verts_.size()), 3);
    for (size_t i = 0; i < verts_.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = verts_[i].transpose();
    m.faces.resize(static_cast<Eigen::Index>(tris_.size()), 3);
    for (size_t i = 0; i < tris_.size(); ++i) {
      m.faces.row(static_cast<Eigen::Index>(i)) << tris_[i][0], tris_[i][1], tris_[i][2];
    }
    return m;
  }

 private:
  std::vector<Eigen::Vector3d> verts_;
  std::vector<std::array<int, 3>> tris_;
};

std::vector<Ring> limb_rings(const Eigen::Vector3d& start, const Eigen::Vector3d& dir, double first, double second,
                             double radius, const std::array<double, 3>& taper) {
  std::vector<Ring> rings;
  for (int k = 1; k <= 3; ++k) rings.push_back({start + dir * (first * k / 3.0), dir, radius});
  for (int k = 1; k <= 3; ++k) {
    rings.push_back({start + dir * (first + second * k / 3.0), dir, radius * taper[static_cast<size_t>(k - 1)]});
  }
  return rings;
}

double segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

Eigen::RowVectorXd ShapeParams::to_beta(int width) const {
  if (width < kUsed) throw Error("shape width must be at least " + std::to_string(kUsed));
  Eigen::RowVectorXd beta = Eigen::RowVectorXd::Zero(width);
  beta.head(kUsed) << arm_length, arm_radius, leg_length, leg_radius, torso_height, torso_width, torso_depth,
      neck_length, head_size;
  return beta;
}

ShapeParams ShapeParams::from_beta(const Eigen::RowVectorXd& beta) {
  if (beta.size() < kUsed) throw Error("shape signature needs at least " + std::to_string(kUsed) + " entries");
  ShapeParams s{beta(0), beta(1), beta(2), beta(3), beta(4), beta(5), beta(6), beta(7), beta(8)};
  s.validate();
  return s;
}

void ShapeParams::validate() const {
  const std::array<double, kUsed> v = {arm_length, arm_radius, leg_length, leg_radius, torso_height,
                                       torso_width, torso_depth, neck_length, head_size};
  for (size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
      throw Error("shape parameter " + std::to_string(i) + " must be positive and finite");
    }
  }
}

std::string to_string(MotionStyle s) {
  switch (s) {
    case MotionStyle::kRest: return "rest";
    case MotionStyle::kWalk: return "walk";
    case MotionStyle::kWave: return "wave";
  }
  return "?";
}

MotionStyle parse_motion_style(const std::string& s) {
  if (s == "rest") return MotionStyle::kRest;
  if (s == "walk") return MotionStyle::kWalk;
  if (s == "wave") return MotionStyle::kWave;
  throw Error("unknown motion style '" + s + "'");
}

KinematicTree humanoid_tree(const ShapeParams& shape) {
  const BodyLayout b = layout_for(shape);
  KinematicTree tree;
  for (int j = 0; j < kSynthJoints; ++j) {
    const int p = kParents[static_cast<size_t>(j)];
    tree.parents.push_back(p);
    tree.names.emplace_back(kNames[static_cast<size_t>(j)]);
    tree.offsets.push_back(p < 0 ? b.joints[static_cast<size_t>(j)]
                                 : Eigen::Vector3d(b.joints[static_cast<size_t>(j)] - b.joints[static_cast<size_t>(p)]));
  }
  return tree;
}

Rig build_humanoid(const ShapeParams& shape) {
  const BodyLayout b = layout_for(shape);
  MeshBuilder mb;

  // Torso: a 3×3×1 lattice box. Quads are keyed by (axis, side, b, c) to find limb attachments.
  const std::array<int, 3> cells = {3, 3, 1};
  std::map<std::array<int, 3>, int> lattice;
  auto lattice_vertex = [&](const std::array<int, 3>& ijk) {
    auto it = lattice.find(ijk);
    if (it != lattice.end()) return it->second;
    const Eigen::Vector3d p(-0.5 * b.width + b.width * ijk[0] / 3.0, b.bottom + b.height * ijk[1] / 3.0,
                            -0.5 * b.depth + b.depth * ijk[2]);
    const int id = mb.add(p);
    lattice.emplace(ijk, id);
    return id;
  };
  std::map<std::array<int, 4>, std::array<int, 4>> attachments = {
      {{1, 1, 0, 1}, {}}, {{0, 1, 2, 0}, {}}, {{0, 0, 2, 0}, {}}, {{1, 0, 0, 2}, {}}, {{1, 0, 0, 0}, {}}};
  for (int a = 0; a < 3; ++a) {
    const int bx = (a + 1) % 3, cx = (a + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      for (int ib = 0; ib < cells[static_cast<size_t>(bx)]; ++ib) {
        for (int ic = 0; ic < cells[static_cast<size_t>(cx)]; ++ic) {
          auto corner = [&](int db, int dc) {
            std::array<int, 3> ijk{};
            ijk[static_cast<size_t>(a)] = side == 1 ? cells[static_cast<size_t>(a)] : 0;
            ijk[static_cast<size_t>(bx)] = ib + db;
            ijk[static_cast<size_t>(cx)] = ic + dc;
            return lattice_vertex(ijk);
          };
          std::array<int, 4> q = side == 1 ? std::array<int, 4>{corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)}
                                           : std::array<int, 4>{corner(0, 0), corner(0, 1), corner(1, 1), corner(1, 0)};
          auto it = attachments.find({a, side, ib, ic});
          if (it != attachments.end()) {
            it->second = q;
          } else {
            mb.quad(q[0], q[1], q[2], q[3]);
          }
        }
      }
    }
  }

  const Eigen::Vector3d x = Eigen::Vector3d::UnitX(), y = Eigen::Vector3d::UnitY();
  const auto& j = b.joints;
  std::vector<Ring> head;
  head.push_back({j[kNeck] + 0.5 * b.neck * y, y, 0.03});
  head.push_back({j[kHead], y, 0.03});
  const std::array<double, 4> head_profile = {0.85, 1.0, 0.9, 0.55};
  for (int k = 1; k <= 4; ++k) {
    head.push_back({j[kHead] + b.head * k / 4.0 * y, y, b.head_radius * head_profile[static_cast<size_t>(k - 1)]});
  }
  mb.extrude(attachments.at({1, 1, 0, 1}), head);
  const std::array<double, 3> arm_taper = {0.9, 0.85, 0.6};
  const std::array<double, 3> leg_taper = {0.9, 0.85, 0.7};
  mb.extrude(attachments.at({0, 1, 2, 0}), limb_rings(j[kLShoulder], x, b.upper_arm, b.forearm, b.arm_radius, arm_taper));
  mb.extrude(attachments.at({0, 0, 2, 0}), limb_rings(j[kRShoulder], -x, b.upper_arm, b.forearm, b.arm_radius, arm_taper));
  mb.extrude(attachments.at({1, 0, 0, 2}), limb_rings(j[kLHip], -y, b.thigh, b.shin, b.leg_radius, leg_taper));
  mb.extrude(attachments.at({1, 0, 0, 0}), limb_rings(j[kRHip], -y, b.thigh, b.shin, b.leg_radius, leg_taper));

  Rig rig;
  rig.rest = mb.finish();
  rig.tree = humanoid_tree(shape);
  mesh::validate(rig.rest);

  // Distance-to-bone-surface weights with a Gaussian falloff, pruned and renormalized.
  constexpr double kFalloff = 0.03;
  const Eigen::Index n = rig.rest.vertices.rows();
  rig.weights = RowMatrix::Zero(n, kSynthJoints);
  for (Eigen::Index v = 0; v < n; ++v) {
    const Eigen::Vector3d p = rig.rest.vertices.row(v).transpose();
    std::array<double, kSynthJoints> d{};
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < d.size(); ++k) {
      d[k] = std::max(0.0, segment_distance(p, b.joints[k], b.bone_ends[k]) - b.bone_radii[k]);
      best = std::min(best, d[k]);
    }
    for (size_t k = 0; k < d.size(); ++k) {
      const double w = std::exp(-std::pow((d[k] - best) / kFalloff, 2));
      rig.weights(v, static_cast<Eigen::Index>(k)) = w < 1e-6 ? 0.0 : w;
    }
    rig.weights.row(v) /= rig.weights.row(v).sum();
  }
  return rig;
}

std::vector<Oscillator> motion_preset(MotionStyle style, std::uint64_t seed, double amplitude_scale) {
  std::vector<Oscillator> osc;
  const double half = 0.5 * kPi, three_half = 1.5 * kPi;
  switch (style) {
    case MotionStyle::kRest:
      break;
    case MotionStyle::kWalk:
      osc = {{kLHip, 0, 0.5, 1.0, 0.0},           {kRHip, 0, 0.5, 1.0, kPi},
             {kLKnee, 0, 0.35, 1.0, half},        {kRKnee, 0, -0.35, 1.0, three_half},
             {kLShoulder, 1, 0.35, 1.0, kPi},     {kRShoulder, 1, 0.35, 1.0, 0.0},
             {kLElbow, 1, 0.25, 1.0, half},       {kRElbow, 1, -0.25, 1.0, three_half},
             {kChest, 1, 0.12, 1.0, kPi},         {kHead, 1, 0.15, 0.5, 0.0}};
      break;
    case MotionStyle::kWave:
      osc = {{kRShoulder, 2, 0.9, 0.4, half},     {kRElbow, 2, 0.5, 1.5, 0.0},
             {kLShoulder, 2, -0.2, 0.5, half},    {kHead, 0, 0.15, 0.7, 0.0},
             {kChest, 2, 0.1, 0.4, 0.0},          {kLHip, 2, 0.1, 0.5, 0.0}};
      break;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.8, 1.2), freq(0.85, 1.15);
  for (auto& o : osc) {
    o.amplitude *= amp(rng) * amplitude_scale;
    o.frequency *= freq(rng);
  }
  return osc;
}

RowMatrix sample_angles(const std::vector<Oscillator>& oscillators, int joints, int frames, double frame_rate) {
  if (frames < 1) throw Error("a motion needs at least one frame");
  RowMatrix angles = RowMatrix::Zero(frames, 3 * joints);
  for (int f = 0; f < frames; ++f) {
    const double t = f / frame_rate;
    for (const auto& o : oscillators) {
      angles(f, 3 * o.joint + o.axis) += o.amplitude * (std::sin(2.0 * kPi * o.frequency * t + o.phase) - std::sin(o.phase));
    }
  }
  return angles;
}

SynthSequence synth_generate(const SynthConfig& config) {
  SynthSequence seq;
  seq.rig = build_humanoid(config.shape);
  auto osc = motion_preset(config.style, config.seed, config.amplitude_scale);
  if (config.root_motion) osc.push_back({kPelvis, 1, 0.15 * config.amplitude_scale, 0.5, 0.0});

  MotionManifest& m = seq.manifest;
  m.name = config.name;
  m.tree = seq.rig.tree;
  m.frame_rate = config.frame_rate;
  m.angles = sample_angles(osc, kSynthJoints, config.frames, config.frame_rate);
  m.beta = config.shape.to_beta();
  if (config.root_motion) {
    for (int f = 0; f < config.frames; ++f) {
      motion::RigidTransform g;
      g.translation = Eigen::Vector3d(0.0, 0.0, 0.4 * config.amplitude_scale * f / config.frame_rate);
      m.global_transforms.push_back(g);
    }
  }
  seq.frames = pose_sequence(m, seq.rig.rest.vertices, seq.rig.weights);
  return seq;
}

std::vector<ShapeParams> sample_shapes(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.8, 1.25);
  std::vector<ShapeParams> shapes;
  for (int i = 0; i < count; ++i) {
    ShapeParams s;
    for (double* v : {&s.arm_length, &s.arm_radius, &s.leg_length, &s.leg_radius, &s.torso_height, &s.torso_width,
                      &s.torso_depth, &s.neck_length, &s.head_size}) {
      *v = u(rng);
    }
    shapes.push_back(s);
  }
  return shapes;
}

void write_sequence(const std::filesystem::path& dir, SynthSequence& sequence) {
  std::filesystem::create_directories(dir / "gt");
  save_obj(dir / "rest.obj", sequence.rig.rest);
  auto& m = sequence.manifest;
  m.rest_mesh = "rest.obj";
  m.gt_meshes.clear();
  for (size_t f = 0; f < sequence.frames.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "gt/frame_%04zu.obj", f);
    save_obj(dir / name, sequence.rig.rest.faces, sequence.frames[f]);
    m.gt_meshes.emplace_back(name);
  }
  save_motion(dir / "motion.json", m);
}

SequenceData load_sequence(const std::filesystem::path& manifest_path) {
  SequenceData s;
  s.manifest_path = manifest_path;
  s.manifest = load_motion(manifest_path);
  s.name = s.manifest.name;
  const auto dir = manifest_path.parent_path();
  for (const auto& rel : s.manifest.gt_meshes) {
    auto m = load_obj(dir / rel);
    if (s.frames.empty()) {
      s.first_frame = m;
    } else if (m.faces != s.first_frame.faces || m.vertices.rows() != s.first_frame.vertices.rows()) {
      throw IoError((dir / rel).string() + ": connectivity differs from the first frame");
    }
    s.frames.push_back(std::move(m.vertices));
  }
  if (s.frames.empty()) {
    if (s.manifest.rest_mesh.empty()) throw IoError(manifest_path.string() + ": no meshes referenced");
    s.first_frame = load_obj(dir / s.manifest.rest_mesh);
  }
  return s;
}

std::vector<SequenceData> load_dataset(const std::filesystem::path& path) {
  const auto index = std::filesystem::is_directory(path) ? path / kDatasetIndex : path;
  std::ifstream in(index);
  if (!in) throw IoError("cannot open dataset index " + index.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(index.string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != "trj-dataset") throw IoError(index.string() + ": not a dataset index");
  std::vector<SequenceData> out;
  for (const auto& rel : j.at("sequences")) out.push_back(load_sequence(index.parent_path() / rel.get<std::string>()));
  if (out.empty()) throw IoError(index.string() + ": dataset has no sequences");
  return out;
}

void save_dataset_index(const std::filesystem::path& dir, const std::vector<std::string>& sequence_dirs) {
  nlohmann::json j;
  j["format"] = "trj-dataset";
  j["version"] = 1;
  j["sequences"] = nlohmann::json::array();
  for (const auto& s : sequence_dirs) j["sequences"].push_back(s + "/motion.json");
  std::ofstream out(dir / kDatasetIndex);
  if (!out) throw IoError("cannot write dataset index in " + dir.string());
  out << j.dump(1) << '\n';
}

}  // namespace trj::io
