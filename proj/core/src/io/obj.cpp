#include "trj/io/obj.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace trj::io {

namespace {

int parse_index(const std::string& token, int vertex_count, const std::string& where) {
  const std::string head = token.substr(0, token.find('/'));
  size_t used = 0;
  int idx = 0;
  try {
    idx = std::stoi(head, &used);
  } catch (const std::exception&) {
    throw IoError(where + ": bad face index '" + token + "'");
  }
  if (used != head.size() || idx == 0) throw IoError(where + ": bad face index '" + token + "'");
  return idx > 0 ? idx - 1 : vertex_count + idx;
}

}  // namespace

mesh::TriMesh parse_obj(std::istream& in, const std::string& source) {
  std::vector<double> verts;
  std::vector<int> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) throw IoError(where + ": malformed vertex record");
      verts.insert(verts.end(), {x, y, z});
    } else if (tag == "f") {
      std::vector<std::string> corners;
      std::string tok;
      while (ss >> tok) corners.push_back(tok);
      if (corners.size() != 3) {
        throw IoError(where + ": face has " + std::to_string(corners.size()) +
                      " corners; only triangles are accepted");
      }
      const int nv = static_cast<int>(verts.size() / 3);
      for (const auto& c : corners) faces.push_back(parse_index(c, nv, where));
    }
  }
  mesh::TriMesh m;
  m.vertices = Eigen::Map<const Positions>(verts.data(), static_cast<Eigen::Index>(verts.size() / 3), 3);
  m.faces = Eigen::Map<const FaceIndices>(faces.data(), static_cast<Eigen::Index>(faces.size() / 3), 3);
  return m;
}

mesh::TriMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open OBJ file " + path.string());
  return parse_obj(in, path.string());
}

void save_obj(const std::filesystem::path& path, const mesh::TriMesh& mesh) { save_obj(path, mesh.faces, mesh.vertices); }

void save_obj(const std::filesystem::path& path, const FaceIndices& faces, const Positions& positions) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (f == nullptr) throw IoError("cannot write OBJ file " + path.string());
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    std::fprintf(f, "v %.17g %.17g %.17g\n", positions(i, 0), positions(i, 1), positions(i, 2));
  }
  for (Eigen::Index i = 0; i < faces.rows(); ++i) {
    std::fprintf(f, "f %d %d %d\n", faces(i, 0) + 1, faces(i, 1) + 1, faces(i, 2) + 1);
  }
  const bool ok = std::fflush(f) == 0;
  std::fclose(f);
  if (!ok) throw IoError("failed writing OBJ file " + path.string());
}

}  // namespace trj::io
