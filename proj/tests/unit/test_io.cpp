#include "test_support.hpp"

#include "trj/io/checkpoint.hpp"
#include "trj/io/manifest.hpp"
#include "trj/io/obj.hpp"
#include "trj/io/skeleton.hpp"
#include "trj/io/synth.hpp"
#include "trj/io/wks_cache.hpp"
#include "trj/mesh/primitives.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace trj;
using namespace trj::io;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

KinematicTree two_bone() {
  KinematicTree t;
  t.parents = {-1, 0};
  t.offsets = {Eigen::Vector3d(0.1, -0.2, 0.05), Eigen::Vector3d(0.0, 0.5, 0.0)};
  t.names = {"upper", "lower"};
  return t;
}

/// Smooth two-bone weights along the tube axis.
RowMatrix tube_weights(const Positions& rest) {
  RowMatrix w(rest.rows(), 2);
  for (Eigen::Index i = 0; i < rest.rows(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-(rest(i, 1) - 0.5) / 0.05));
    w(i, 0) = 1.0 - s;
    w(i, 1) = s;
  }
  return w;
}

MotionManifest small_manifest(int frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MotionManifest m;
  m.name = "m" + std::to_string(seed);
  m.tree = two_bone();
  m.frame_rate = 24.0 + u(rng);
  m.angles.resize(frames, 6);
  for (Eigen::Index i = 0; i < m.angles.size(); ++i) m.angles.data()[i] = u(rng);
  m.beta = Eigen::RowVectorXd::Zero(16);
  for (int i = 0; i < 16; ++i) m.beta(i) = u(rng) * 1e-3 + 1.0 / 3.0;
  for (int t = 0; t < frames; ++t) {
    m.gt_meshes.push_back("gt/frame_" + std::to_string(t) + ".obj");
    motion::RigidTransform g;
    g.rotation = Eigen::AngleAxisd(u(rng) * 3.0, Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized()).toRotationMatrix();
    g.translation = Eigen::Vector3d(u(rng), u(rng), u(rng)) / 7.0;
    m.global_transforms.push_back(g);
  }
  m.rest_mesh = "rest.obj";
  return m;
}

void check_manifest_equal(const MotionManifest& a, const MotionManifest& b) {
  CHECK(a.name == b.name);
  CHECK(a.frame_rate == b.frame_rate);
  CHECK(a.tree.parents == b.tree.parents);
  CHECK(a.tree.names == b.tree.names);
  for (size_t j = 0; j < a.tree.offsets.size(); ++j) CHECK(a.tree.offsets[j] == b.tree.offsets[j]);
  CHECK(a.angles == b.angles);
  CHECK(a.beta == b.beta);
  CHECK(a.gt_meshes == b.gt_meshes);
  CHECK(a.rest_mesh == b.rest_mesh);
  REQUIRE(a.global_transforms.size() == b.global_transforms.size());
  for (size_t t = 0; t < a.global_transforms.size(); ++t) {
    CHECK(a.global_transforms[t].rotation == b.global_transforms[t].rotation);
    CHECK(a.global_transforms[t].translation == b.global_transforms[t].translation);
  }
}

}  // namespace

TEST_CASE("obj: single triangle, negative indices, comments") {
  std::istringstream in("# tri\nv 0 0 0\nv 1 0 0\nvn 0 0 1\nv 0 1 0\nf 1//1 2//1 -1//1\n");
  const mesh::TriMesh m = parse_obj(in);
  CHECK(m.num_vertices() == 3);
  CHECK(m.num_faces() == 1);
  CHECK(m.faces(0, 2) == 2);
}

TEST_CASE("obj: quads are rejected with the line number") {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  try {
    parse_obj(in, "quad.obj");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("quad.obj:5") != std::string::npos);
    CHECK(std::string(e.what()).find("4 corners") != std::string::npos);
  }
  std::istringstream bad("v 0 0 0\nf 1 2 x\n");
  CHECK_THROWS_AS(parse_obj(bad), IoError);
  CHECK_THROWS_AS(load_obj("/nonexistent/file.obj"), IoError);
}

TEST_CASE("obj: round trip is bit exact on random meshes") {
  const fs::path dir = testing::temp_dir("obj");
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    mesh::TriMesh m = testing::bumpy_grid(3 + trial % 4, 4, static_cast<std::uint64_t>(trial));
    for (Eigen::Index i = 0; i < m.vertices.size(); ++i) m.vertices.data()[i] = n(rng) * std::pow(10.0, trial % 7 - 3);
    save_obj(dir / "m.obj", m);
    const mesh::TriMesh back = load_obj(dir / "m.obj");
    CHECK(back.vertices == m.vertices);
    CHECK(back.faces == m.faces);
  }
}

TEST_CASE("skeleton: validation") {
  KinematicTree t = two_bone();
  CHECK_NOTHROW(t.validate());
  CHECK(t.root() == 0);
  t.parents = {1, 0};
  CHECK_THROWS(t.validate());
  t.parents = {-1, -1};
  CHECK_THROWS(t.validate());
  t = two_bone();
  t.offsets[1].x() = std::nan("");
  CHECK_THROWS(t.validate());
  RowMatrix w(2, 2);
  w << 0.5, 0.5, 0.7, 0.4;
  CHECK_THROWS(validate_skin_weights(w, 2));
  w << 0.5, 0.5, -0.1, 1.1;
  CHECK_THROWS(validate_skin_weights(w, 2));
}

TEST_CASE("lbs: zero angles give the rest mesh, one rigid joint gives a rigid motion") {
  const mesh::TriMesh tube = mesh::capped_cylinder(8, 10, 0.05, 1.0);
  const KinematicTree tree = two_bone();
  const RowMatrix w = tube_weights(tube.vertices);
  CHECK((lbs_pose(tube.vertices, tree, w, Eigen::RowVectorXd::Zero(6)) - tube.vertices).cwiseAbs().maxCoeff() < 1e-15);

  RowMatrix rigid = RowMatrix::Zero(tube.num_vertices(), 2);
  rigid.col(1).setOnes();
  Eigen::RowVectorXd a = Eigen::RowVectorXd::Zero(6);
  a.segment<3>(3) << 0.3, -0.4, 0.9;
  const Positions posed = lbs_pose(tube.vertices, tree, rigid, a);
  const Eigen::Matrix3d r = euler_xyz(Eigen::Vector3d(0.3, -0.4, 0.9));
  const Eigen::RowVector3d pivot = (tree.offsets[0] + tree.offsets[1]).transpose();
  const Positions expected = ((tube.vertices.rowwise() - pivot) * r.transpose()).rowwise() + pivot;
  CHECK((posed - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("lbs: 90 degree elbow on a tube matches an independent transform chain") {
  const mesh::TriMesh tube = mesh::capped_cylinder(8, 10, 0.05, 1.0);
  const KinematicTree tree = two_bone();
  const RowMatrix w = tube_weights(tube.vertices);
  const Eigen::Vector3d root_angles(0.2, -0.1, 0.35);
  Eigen::RowVectorXd a(6);
  a << root_angles.transpose(), 0.0, 0.0, std::numbers::pi / 2.0;
  const Positions posed = lbs_pose(tube.vertices, tree, w, a);

  // oracle: homogeneous transforms built from angle-axis factors
  auto rot = [](const Eigen::Vector3d& e) {
    return Eigen::Affine3d(Eigen::AngleAxisd(e.x(), Eigen::Vector3d::UnitX()) *
                           Eigen::AngleAxisd(e.y(), Eigen::Vector3d::UnitY()) *
                           Eigen::AngleAxisd(e.z(), Eigen::Vector3d::UnitZ()));
  };
  const Eigen::Affine3d g0 = Eigen::Translation3d(tree.offsets[0]) * rot(root_angles);
  const Eigen::Affine3d g1 = g0 * Eigen::Translation3d(tree.offsets[1]) * rot(Eigen::Vector3d(0, 0, std::numbers::pi / 2));
  const Eigen::Affine3d rest0(Eigen::Translation3d(tree.offsets[0]));
  const Eigen::Affine3d rest1(Eigen::Translation3d(tree.offsets[0] + tree.offsets[1]));
  const Eigen::Affine3d skin0 = g0 * rest0.inverse();
  const Eigen::Affine3d skin1 = g1 * rest1.inverse();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < tube.vertices.rows(); ++i) {
    const Eigen::Vector3d x = tube.vertices.row(i).transpose();
    const Eigen::Vector3d y = w(i, 0) * (skin0 * x) + w(i, 1) * (skin1 * x);
    worst = std::max(worst, (posed.row(i).transpose() - y).norm());
  }
  CHECK(worst < 1e-10);

  const auto fk = forward_kinematics(tree, a);
  CHECK((fk[1].position - g1.translation()).norm() < 1e-14);
  CHECK((fk[1].rotation - g1.linear()).norm() < 1e-14);
}

TEST_CASE("manifest: 2 joints by 3 frames, round trip, missing mesh") {
  const fs::path dir = testing::temp_dir("manifest");
  MotionManifest m = small_manifest(3, 1);
  save_motion(dir / "motion.json", m);
  const MotionManifest back = load_motion(dir / "motion.json", false);
  CHECK(back.angles.rows() == 3);
  CHECK(back.angles.cols() == 6);
  check_manifest_equal(m, back);
  try {
    load_motion(dir / "motion.json", true);
    FAIL("expected missing-file error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("frame_0.obj") != std::string::npos);
  }
  m.angles.conservativeResize(3, 5);
  CHECK_THROWS(m.validate());
  m = small_manifest(3, 1);
  m.gt_meshes.pop_back();
  CHECK_THROWS(m.validate());
  m = small_manifest(3, 1);
  m.gt_meshes.clear();
  m.global_transforms.clear();
  CHECK_NOTHROW(m.validate());

  std::ofstream(dir / "bad.json") << R"({"format": "something-else", "version": 1})";
  CHECK_THROWS_AS(load_motion(dir / "bad.json", false), IoError);
}

TEST_CASE("manifest: bit identical round trips on random instances") {
  const fs::path dir = testing::temp_dir("manifest_rt");
  for (int trial = 0; trial < 25; ++trial) {
    const MotionManifest m = small_manifest(1 + trial % 9, static_cast<std::uint64_t>(100 + trial));
    save_motion(dir / "a.json", m);
    const MotionManifest back = load_motion(dir / "a.json", false);
    check_manifest_equal(m, back);
    save_motion(dir / "b.json", back);
    CHECK(read_bytes(dir / "a.json") == read_bytes(dir / "b.json"));
  }
}

TEST_CASE("zero root orientation") {
  MotionManifest m = small_manifest(4, 3);
  m.global_transforms.clear();
  MotionManifest flat = m;
  flat.angles.leftCols(3).setZero();
  const MotionManifest unchanged = zero_root_orientation(flat);
  check_manifest_equal(unchanged, flat);

  MotionManifest yaw = m;
  yaw.angles.leftCols(3).setZero();
  yaw.angles.col(1).setConstant(std::numbers::pi / 2);
  const MotionManifest z = zero_root_orientation(yaw);
  CHECK(z.angles.leftCols(3).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(z.global_transforms.size() == 4);
  const Eigen::Matrix3d ry = euler_xyz(Eigen::Vector3d(0, std::numbers::pi / 2, 0));
  for (const auto& g : z.global_transforms) CHECK((g.rotation - ry).norm() < 1e-14);

  // forward-kinematics oracle on arbitrary root motion with prior global transforms
  const MotionManifest orig = small_manifest(6, 9);
  const MotionManifest zeroed = zero_root_orientation(orig);
  for (int t = 0; t < 6; ++t) {
    const auto before = forward_kinematics(orig.tree, orig.angles.row(t));
    const auto after = forward_kinematics(zeroed.tree, zeroed.angles.row(t));
    const auto& g0 = orig.global_transforms[static_cast<size_t>(t)];
    const auto& g1 = zeroed.global_transforms[static_cast<size_t>(t)];
    for (size_t j = 0; j < before.size(); ++j) {
      CHECK((g1.rotation * after[j].rotation - g0.rotation * before[j].rotation).norm() < 1e-12);
      CHECK(((g1.rotation * after[j].position + g1.translation) - (g0.rotation * before[j].position + g0.translation))
                .norm() < 1e-12);
    }
  }
  const mesh::TriMesh tube = mesh::capped_cylinder(6, 6, 0.05, 1.0);
  const RowMatrix w = tube_weights(tube.vertices);
  const auto p0 = pose_sequence(orig, tube.vertices, w);
  const auto p1 = pose_sequence(zeroed, tube.vertices, w);
  for (size_t t = 0; t < p0.size(); ++t) CHECK((p0[t] - p1[t]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("checkpoint: round trip, corruption, truncation, missing tensor") {
  const fs::path dir = testing::temp_dir("ckpt");
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<nn::Parameter> params;
    for (int k = 0; k < 1 + trial % 5; ++k) {
      nn::Matrix v(1 + (trial + k) % 7, 1 + k % 3);
      for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = n(rng);
      params.emplace_back("p" + std::to_string(k), v);
    }
    std::vector<nn::Parameter*> ptrs;
    for (auto& p : params) ptrs.push_back(&p);
    Checkpoint c;
    c.config = R"({"trial":)" + std::to_string(trial) + "}";
    add_parameters(c, ptrs, "net.");
    save_checkpoint(dir / "c.trj", c);
    const Checkpoint back = load_checkpoint(dir / "c.trj");
    CHECK(back.config == c.config);
    CHECK(serialize_checkpoint(back) == serialize_checkpoint(c));
    std::vector<nn::Parameter> fresh = params;
    for (auto& p : fresh) p.value.setZero();
    std::vector<nn::Parameter*> fptrs;
    for (auto& p : fresh) fptrs.push_back(&p);
    restore_parameters(back, fptrs, "net.");
    for (size_t k = 0; k < params.size(); ++k) CHECK(fresh[k].value == params[k].value);
  }
  CHECK_FALSE(fs::exists(dir / "c.trj.tmp"));

  std::vector<std::uint8_t> bytes = read_bytes(dir / "c.trj");
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 9);
  write_bytes(dir / "cut.trj", cut);
  try {
    load_checkpoint(dir / "cut.trj");
    FAIL("expected checksum error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("checksum") != std::string::npos);
  }
  bytes[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(deserialize_checkpoint(bytes), IoError);
  CHECK_THROWS_AS(deserialize_checkpoint(std::vector<std::uint8_t>{'T', 'R'}), IoError);

  Checkpoint c = load_checkpoint(dir / "c.trj");
  nn::Parameter missing("ghost", nn::Matrix::Zero(2, 2));
  nn::Parameter* mp[] = {&missing};
  try {
    restore_parameters(c, mp, "net.");
    FAIL("expected missing tensor error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("net.ghost") != std::string::npos);
  }
  nn::Parameter wrong("p0", nn::Matrix::Zero(40, 40));
  nn::Parameter* wp[] = {&wrong};
  CHECK_THROWS_AS(restore_parameters(c, wp, "net."), IoError);
}

TEST_CASE("checkpoint: float32 tensors and crc") {
  Checkpoint c;
  Tensor t = Tensor::from_matrix("half", nn::Matrix::Constant(2, 3, 0.1));
  t.type = ElementType::kFloat32;
  c.tensors.push_back(t);
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(c));
  CHECK(back.at("half").to_matrix()(1, 2) == doctest::Approx(0.1).epsilon(1e-7));
  CHECK(back.at("half").type == ElementType::kFloat32);
  const std::string s = "123456789";
  CHECK(crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())) == 0xCBF43926u);
}

TEST_CASE("synth: humanoid rig is valid and the first frame is the rest pose") {
  const Rig rig = build_humanoid(ShapeParams{});
  CHECK(rig.rest.num_faces() == 300);
  CHECK(rig.tree.joints() == kSynthJoints);
  CHECK_NOTHROW(mesh::validate(rig.rest));
  CHECK(mesh::is_connected(rig.rest));
  CHECK_NOTHROW(validate_skin_weights(rig.weights, kSynthJoints));

  SynthConfig cfg;
  cfg.frames = 20;
  const SynthSequence seq = synth_generate(cfg);
  REQUIRE(seq.frames.size() == 20);
  CHECK((seq.frames[0] - rig.rest.vertices).cwiseAbs().maxCoeff() < 1e-12);
  for (const auto& f : seq.frames) CHECK_NOTHROW(mesh::build_local_bases(mesh::TriMesh{f, rig.rest.faces}));
}

TEST_CASE("synth: zero trajectories are static, seeds are reproducible") {
  SynthConfig cfg;
  cfg.style = MotionStyle::kRest;
  cfg.frames = 10;
  const SynthSequence still = synth_generate(cfg);
  for (const auto& f : still.frames) CHECK((f - still.rig.rest.vertices).cwiseAbs().maxCoeff() < 1e-14);
  cfg.style = MotionStyle::kWalk;
  cfg.amplitude_scale = 0.0;
  for (const auto& f : synth_generate(cfg).frames) CHECK((f - still.rig.rest.vertices).cwiseAbs().maxCoeff() < 1e-14);

  cfg.amplitude_scale = 1.0;
  cfg.seed = 42;
  const SynthSequence a = synth_generate(cfg), b = synth_generate(cfg);
  CHECK(a.manifest.angles == b.manifest.angles);
  for (size_t t = 0; t < a.frames.size(); ++t) CHECK(a.frames[t] == b.frames[t]);
  cfg.seed = 43;
  CHECK(synth_generate(cfg).manifest.angles != a.manifest.angles);
}

TEST_CASE("synth: doubling the arm length doubles the arm") {
  ShapeParams s;
  const Rig base = build_humanoid(s);
  s.arm_length = 2.0;
  const Rig longer = build_humanoid(s);
  const double shoulder = 0.5 * 0.24;
  const double reach0 = base.rest.vertices.col(0).maxCoeff() - shoulder;
  const double reach1 = longer.rest.vertices.col(0).maxCoeff() - shoulder;
  CHECK(reach1 == doctest::Approx(2.0 * reach0).epsilon(1e-12));
  CHECK(longer.rest.vertices.col(1).maxCoeff() == doctest::Approx(base.rest.vertices.col(1).maxCoeff()));
}

TEST_CASE("synth: beta encoding and shape sampling") {
  ShapeParams s;
  s.leg_length = 1.2;
  s.head_size = 0.9;
  const Eigen::RowVectorXd beta = s.to_beta();
  CHECK(beta.size() == 16);
  CHECK(beta.tail(7).cwiseAbs().maxCoeff() == 0.0);
  const ShapeParams back = ShapeParams::from_beta(beta);
  CHECK(back.leg_length == 1.2);
  CHECK(back.head_size == 0.9);
  Eigen::RowVectorXd bad = beta;
  bad(0) = -1.0;
  CHECK_THROWS(ShapeParams::from_beta(bad));
  const auto shapes = sample_shapes(5, 7);
  REQUIRE(shapes.size() == 5);
  for (size_t i = 0; i < 5; ++i) {
    for (size_t j = i + 1; j < 5; ++j) CHECK(shapes[i].to_beta() != shapes[j].to_beta());
  }
  CHECK(parse_motion_style("wave") == MotionStyle::kWave);
  CHECK_THROWS(parse_motion_style("dance"));
}

TEST_CASE("synth: written sequences and datasets load back") {
  const fs::path dir = testing::temp_dir("dataset");
  SynthConfig cfg;
  cfg.frames = 6;
  cfg.root_motion = true;
  SynthSequence seq = synth_generate(cfg);
  write_sequence(dir / "seq_000", seq);
  save_dataset_index(dir, {"seq_000"});
  const auto data = load_dataset(dir);
  REQUIRE(data.size() == 1);
  CHECK(data[0].name == "seq_000");
  CHECK(data[0].frames.size() == 6);
  CHECK(data[0].first_frame.faces == seq.rig.rest.faces);
  const auto posed = pose_sequence(data[0].manifest, seq.rig.rest.vertices, seq.rig.weights);
  for (size_t t = 0; t < 6; ++t) CHECK((data[0].frames[t] - posed[t]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(data[0].manifest.global_transforms.size() == 6);

  fs::remove(dir / "seq_000" / "gt" / "frame_0003.obj");
  try {
    load_dataset(dir / kDatasetIndex);
    FAIL("expected missing frame error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("frame_0003.obj") != std::string::npos);
  }
}

TEST_CASE("wks cache: stores once and returns the computed table") {
  const fs::path dir = testing::temp_dir("wks_cache");
  const mesh::TriMesh m = mesh::icosphere(1);
  const features::WksConfig cfg;
  const RowMatrix direct = features::wave_kernel_signature_vertices(m, cfg);
  const RowMatrix first = cached_vertex_wks(m, cfg, dir);
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  const RowMatrix second = cached_vertex_wks(m, cfg, dir);
  CHECK(first == direct);
  CHECK(second == direct);
  mesh::TriMesh moved = m;
  moved.vertices(0, 0) += 1e-3;
  CHECK(wks_cache_key(moved, cfg) != wks_cache_key(m, cfg));
  features::WksConfig other = cfg;
  other.bins = 8;
  CHECK(wks_cache_key(m, other) != wks_cache_key(m, cfg));
  CHECK(cached_vertex_wks(m, cfg, "") == direct);
}
