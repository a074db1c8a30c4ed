#include "facefit/obj_io.hpp"

#include <json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace facefit {

namespace {
std::string default_landmark_path(const std::string& path) { return path + ".landmarks.json"; }
}  // namespace

void write_obj(const std::string& path, const Mesh& mesh, const std::string& landmark_path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("obj: cannot open for writing: " + path);
  f << "# facefit mesh\n";
  char buf[128];
  for (Index i = 0; i < mesh.vertex_count(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", mesh.vertices(i, 0),
                  mesh.vertices(i, 1), mesh.vertices(i, 2));
    f << buf;
  }
  for (Index i = 0; i < mesh.uv().rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", mesh.uv()(i, 0), mesh.uv()(i, 1));
    f << buf;
  }
  for (Index i = 0; i < mesh.faces().rows(); ++i) {
    const int a = mesh.faces()(i, 0) + 1, b = mesh.faces()(i, 1) + 1, c = mesh.faces()(i, 2) + 1;
    std::snprintf(buf, sizeof(buf), "f %d/%d %d/%d %d/%d\n", a, a, b, b, c, c);
    f << buf;
  }
  if (!f) throw std::runtime_error("obj: write failed: " + path);

  const std::string lp = landmark_path.empty() ? default_landmark_path(path) : landmark_path;
  nlohmann::json j = mesh.landmarks();
  std::ofstream lf(lp);
  lf << j.dump() << "\n";
}

Mesh read_obj(const std::string& path, const std::string& landmark_path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("obj: cannot open: " + path);
  std::vector<Vec3> verts;
  std::vector<Vec2> uvs;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Vec3 v;
      ss >> v.x() >> v.y() >> v.z();
      verts.push_back(v);
    } else if (tag == "vt") {
      Vec2 t;
      ss >> t.x() >> t.y();
      uvs.push_back(t);
    } else if (tag == "f") {
      std::array<int, 3> face{};
      for (int k = 0; k < 3; ++k) {
        std::string vert;
        ss >> vert;
        face[std::size_t(k)] = std::stoi(vert.substr(0, vert.find('/'))) - 1;
      }
      faces.push_back(face);
    }
  }

  auto topo = std::make_shared<Topology>();
  topo->vertex_count = Index(verts.size());
  topo->faces.resize(Index(faces.size()), 3);
  for (Index i = 0; i < topo->faces.rows(); ++i)
    topo->faces.row(i) << faces[std::size_t(i)][0], faces[std::size_t(i)][1],
        faces[std::size_t(i)][2];
  topo->uv = MatX2::Zero(Index(verts.size()), 2);
  for (Index i = 0; i < Index(uvs.size()) && i < topo->uv.rows(); ++i)
    topo->uv.row(i) = uvs[std::size_t(i)].transpose();

  const std::string lp = landmark_path.empty() ? default_landmark_path(path) : landmark_path;
  std::ifstream lf(lp);
  if (lf) {
    nlohmann::json j;
    lf >> j;
    topo->landmarks = j.get<std::vector<int>>();
  }

  Mesh mesh;
  mesh.vertices.resize(Index(verts.size()), 3);
  for (Index i = 0; i < mesh.vertices.rows(); ++i) mesh.vertices.row(i) = verts[std::size_t(i)].transpose();
  mesh.topology = std::move(topo);
  return mesh;
}

}  // namespace facefit
