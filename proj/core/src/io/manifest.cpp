#include "trj/io/manifest.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace trj::io {

using nlohmann::json;

void MotionManifest::validate() const {
  tree.validate();
  if (angles.cols() != 3 * tree.joints()) {
    throw Error("motion '" + name + "': angle rows have " + std::to_string(angles.cols()) + " entries, expected " +
                std::to_string(3 * tree.joints()));
  }
  if (frames() < 1) throw Error("motion '" + name + "' has no frames");
  if (!angles.allFinite()) throw Error("motion '" + name + "' has non-finite joint angles");
  if (!beta.allFinite()) throw Error("motion '" + name + "' has a non-finite shape signature");
  if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) throw Error("motion '" + name + "' has a bad frame rate");
  if (!gt_meshes.empty() && static_cast<int>(gt_meshes.size()) != frames()) {
    throw Error("motion '" + name + "': " + std::to_string(gt_meshes.size()) + " meshes for " +
                std::to_string(frames()) + " frames");
  }
  if (!global_transforms.empty() && static_cast<int>(global_transforms.size()) != frames()) {
    throw Error("motion '" + name + "': global transform count does not match the frame count");
  }
  for (const auto& g : global_transforms) {
    if (!g.rotation.allFinite() || !g.translation.allFinite()) {
      throw Error("motion '" + name + "' has a non-finite global transform");
    }
  }
}

namespace {

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw IoError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(where + ": bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

MotionManifest load_motion(const std::filesystem::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open motion manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  const std::string where = path.string();
  if (j.value("format", std::string()) != kMotionFormat) throw IoError(where + ": not a motion manifest");
  if (j.value("version", 0) != kMotionVersion) throw IoError(where + ": unsupported manifest version");

  MotionManifest m;
  m.name = j.value("name", path.parent_path().filename().string());
  const json& tree = j.at("tree");
  m.tree.parents = require<std::vector<int>>(tree, "parents", where);
  for (const auto& o : require<std::vector<std::vector<double>>>(tree, "offsets", where)) {
    if (o.size() != 3) throw IoError(where + ": joint offsets must have three entries");
    m.tree.offsets.emplace_back(o[0], o[1], o[2]);
  }
  if (tree.contains("names")) m.tree.names = tree.at("names").get<std::vector<std::string>>();
  m.frame_rate = require<double>(j, "frame_rate", where);

  const auto frames = require<int>(j, "frames", where);
  const auto angles = require<std::vector<std::vector<double>>>(j, "angles", where);
  if (static_cast<int>(angles.size()) != frames) throw IoError(where + ": 'angles' does not have 'frames' rows");
  const size_t width = 3 * m.tree.parents.size();
  m.angles.resize(frames, static_cast<Eigen::Index>(width));
  for (int f = 0; f < frames; ++f) {
    const auto& row = angles[static_cast<size_t>(f)];
    if (row.size() != width) throw IoError(where + ": angle row " + std::to_string(f) + " has the wrong width");
    for (size_t c = 0; c < width; ++c) m.angles(f, static_cast<Eigen::Index>(c)) = row[c];
  }
  const auto beta = require<std::vector<double>>(j, "beta", where);
  m.beta = Eigen::Map<const Eigen::RowVectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  if (j.contains("gt_meshes")) m.gt_meshes = j.at("gt_meshes").get<std::vector<std::string>>();
  if (j.contains("rest_mesh")) m.rest_mesh = j.at("rest_mesh").get<std::string>();
  if (j.contains("global_transforms")) {
    for (const auto& g : j.at("global_transforms")) {
      const auto r = require<std::vector<double>>(g, "rotation", where);
      const auto t = require<std::vector<double>>(g, "translation", where);
      if (r.size() != 9 || t.size() != 3) throw IoError(where + ": global transforms need 9 + 3 entries");
      motion::RigidTransform x;
      x.rotation = Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(r.data());
      x.translation = Eigen::Vector3d(t[0], t[1], t[2]);
      m.global_transforms.push_back(x);
    }
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw IoError(where + ": " + e.what());
  }
  if (check_files) {
    const auto dir = path.parent_path();
    for (const auto& rel : m.gt_meshes) {
      if (!std::filesystem::exists(dir / rel)) throw IoError(where + ": missing mesh file " + (dir / rel).string());
    }
    if (!m.rest_mesh.empty() && !std::filesystem::exists(dir / m.rest_mesh)) {
      throw IoError(where + ": missing mesh file " + (dir / m.rest_mesh).string());
    }
  }
  return m;
}

void save_motion(const std::filesystem::path& path, const MotionManifest& m) {
  m.validate();
  json j;
  j["format"] = kMotionFormat;
  j["version"] = kMotionVersion;
  j["name"] = m.name;
  json offsets = json::array();
  for (const auto& o : m.tree.offsets) offsets.push_back({o.x(), o.y(), o.z()});
  j["tree"] = {{"parents", m.tree.parents}, {"offsets", offsets}, {"names", m.tree.names}};
  j["frame_rate"] = m.frame_rate;
  j["frames"] = m.frames();
  json angles = json::array();
  for (Eigen::Index f = 0; f < m.angles.rows(); ++f) {
    angles.push_back(std::vector<double>(m.angles.row(f).data(), m.angles.row(f).data() + m.angles.cols()));
  }
  j["angles"] = std::move(angles);
  j["beta"] = std::vector<double>(m.beta.data(), m.beta.data() + m.beta.size());
  j["gt_meshes"] = m.gt_meshes;
  if (!m.rest_mesh.empty()) j["rest_mesh"] = m.rest_mesh;
  if (!m.global_transforms.empty()) {
    json gts = json::array();
    for (const auto& g : m.global_transforms) {
      const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r = g.rotation;
      gts.push_back({{"rotation", std::vector<double>(r.data(), r.data() + 9)},
                     {"translation", {g.translation.x(), g.translation.y(), g.translation.z()}}});
    }
    j["global_transforms"] = std::move(gts);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write motion manifest " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed writing motion manifest " + path.string());
}

MotionManifest zero_root_orientation(const MotionManifest& manifest) {
  manifest.validate();
  MotionManifest out = manifest;
  const int root = manifest.tree.root();
  if (manifest.angles.middleCols(3 * root, 3).isZero(0.0)) return out;
  const Eigen::Vector3d pivot = manifest.tree.offsets[static_cast<size_t>(root)];
  out.global_transforms.resize(static_cast<size_t>(manifest.frames()));
  for (int f = 0; f < manifest.frames(); ++f) {
    const Eigen::Matrix3d r = euler_xyz(manifest.angles.block<1, 3>(f, 3 * root).transpose());
    const Eigen::Vector3d t = pivot - r * pivot;
    motion::RigidTransform outer;
    if (!manifest.global_transforms.empty()) outer = manifest.global_transforms[static_cast<size_t>(f)];
    auto& g = out.global_transforms[static_cast<size_t>(f)];
    g.rotation = outer.rotation * r;
    g.translation = outer.rotation * t + outer.translation;
    out.angles.block<1, 3>(f, 3 * root).setZero();
  }
  return out;
}

std::vector<Positions> pose_sequence(const MotionManifest& manifest, const Positions& rest, const RowMatrix& weights) {
  std::vector<Positions> frames;
  frames.reserve(static_cast<size_t>(manifest.frames()));
  for (int f = 0; f < manifest.frames(); ++f) frames.push_back(lbs_pose(rest, manifest.tree, weights, manifest.angles.row(f)));
  if (!manifest.global_transforms.empty()) frames = motion::apply_global_transform(frames, manifest.global_transforms, 1.0);
  return frames;
}

}  // namespace trj::io
