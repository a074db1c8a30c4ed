#include "facefit/blendshape.hpp"

#include "facefit/rng.hpp"

#include <Eigen/QR>

#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

namespace facefit {

namespace {

struct SphereMesh {
  MatX3 vertices;  // unit directions
  FaceMat faces;
};

SphereMesh subdivided_icosahedron(int levels) {
  const Real t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < levels; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3 m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  SphereMesh out;
  out.vertices.resize(Index(verts.size()), 3);
  for (Index i = 0; i < out.vertices.rows(); ++i) out.vertices.row(i) = verts[i].transpose();
  out.faces.resize(Index(faces.size()), 3);
  for (Index i = 0; i < out.faces.rows(); ++i)
    out.faces.row(i) << faces[i][0], faces[i][1], faces[i][2];
  return out;
}

// Azimuthal-equidistant chart about the +z (nose) direction. Seam-free over
// the whole sphere: the face sits near uv (0.5, 0.5), the back of the head
// stretches toward the r = 0.475 circle. Negating x maps u to 1-u exactly,
// which keeps the bilateral mirror a texel-grid involution.
Vec2 sphere_uv(const Vec3& d) {
  const Real z = std::min(std::max(d.z(), Real(-1)), Real(1));
  const Real theta = std::acos(z);
  const Real rho = std::hypot(d.x(), d.y());
  if (rho < 1e-9) {
    if (z > 0) return Vec2(0.5, 0.5);
    return Vec2(0.5, 0.5 + 0.475);  // back pole: mirror-invariant boundary point
  }
  const Real r = 0.475 * theta / M_PI;
  return Vec2(0.5 + r * d.x() / rho, 0.5 + r * d.y() / rho);
}

// Radial head profile, even in x so the template keeps bilateral symmetry.
Vec3 head_deform(const Vec3& d) {
  Real radius = 1.0;
  // nose
  const Vec3 nose_dir = Vec3(0.0, -0.12, 1.0).normalized();
  const Real nose_angle = std::acos(std::min(std::max(d.dot(nose_dir), Real(-1)), Real(1)));
  radius += 0.13 * std::exp(-0.5 * std::pow(nose_angle / 0.20, 2));
  // brow ridge
  const Vec3 brow_dir = Vec3(0.0, 0.35, 1.0).normalized();
  const Real brow_angle = std::acos(std::min(std::max(d.dot(brow_dir), Real(-1)), Real(1)));
  radius += 0.04 * std::exp(-0.5 * std::pow(brow_angle / 0.35, 2));
  // chin
  const Vec3 chin_dir = Vec3(0.0, -0.75, 0.66).normalized();
  const Real chin_angle = std::acos(std::min(std::max(d.dot(chin_dir), Real(-1)), Real(1)));
  radius += 0.05 * std::exp(-0.5 * std::pow(chin_angle / 0.28, 2));
  const Vec3 scale(0.78, 1.0, 0.86);
  return (d.array() * scale.array()).matrix() * radius;
}

// 68 landmark directions laid out like the iBUG annotation (jaw, brows,
// nose, eyes, mouth), expressed as (yaw, pitch) degrees on the face.
std::vector<Vec3> landmark_directions() {
  auto dir = [](Real yaw_deg, Real pitch_deg) {
    const Real y = yaw_deg * M_PI / 180.0, p = pitch_deg * M_PI / 180.0;
    return Vec3(std::sin(y) * std::cos(p), std::sin(p), std::cos(y) * std::cos(p));
  };
  std::vector<Vec3> dirs;
  dirs.reserve(68);
  for (int i = 0; i < 17; ++i) {  // jaw line
    const Real t = i / 16.0;
    dirs.push_back(dir(-72.0 + 144.0 * t, -18.0 - 38.0 * std::sin(M_PI * t)));
  }
  for (int i = 0; i < 5; ++i) dirs.push_back(dir(-44.0 + 8.0 * i, 26.0 + 3.0 * std::sin(M_PI * i / 4.0)));
  for (int i = 0; i < 5; ++i) dirs.push_back(dir(12.0 + 8.0 * i, 26.0 + 3.0 * std::sin(M_PI * i / 4.0)));
  for (int i = 0; i < 4; ++i) dirs.push_back(dir(0.0, 16.0 - 8.0 * i));  // nose bridge
  for (int i = 0; i < 5; ++i) dirs.push_back(dir(-11.0 + 5.5 * i, -10.0));  // nostril base
  for (int side = 0; side < 2; ++side) {  // eyes
    const Real cx = side == 0 ? -24.0 : 24.0;
    for (int i = 0; i < 6; ++i) {
      const Real a = M_PI * i / 3.0;
      dirs.push_back(dir(cx + 8.0 * std::cos(a), 14.0 + 4.0 * std::sin(a)));
    }
  }
  for (int i = 0; i < 12; ++i) {  // outer lips
    const Real a = 2.0 * M_PI * i / 12.0;
    dirs.push_back(dir(15.0 * std::cos(a), -30.0 + 8.0 * std::sin(a)));
  }
  for (int i = 0; i < 8; ++i) {  // inner lips
    const Real a = 2.0 * M_PI * i / 8.0;
    dirs.push_back(dir(9.0 * std::cos(a), -30.0 + 4.0 * std::sin(a)));
  }
  return dirs;
}

std::vector<int> pick_landmarks(const MatX3& sphere_dirs) {
  const auto targets = landmark_directions();
  if (sphere_dirs.rows() < Index(targets.size()))
    throw std::invalid_argument("make_head_model: need at least 68 vertices for landmarks");
  std::vector<int> picked;
  std::vector<char> used(static_cast<std::size_t>(sphere_dirs.rows()), 0);
  picked.reserve(targets.size());
  for (const auto& t : targets) {
    int best = -1;
    Real best_dot = -2.0;
    for (Index i = 0; i < sphere_dirs.rows(); ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      const Real d = sphere_dirs.row(i).dot(t);
      if (d > best_dot) {
        best_dot = d;
        best = static_cast<int>(i);
      }
    }
    used[static_cast<std::size_t>(best)] = 1;
    picked.push_back(best);
  }
  return picked;
}

MatX orthonormal_basis(Index rows, Index cols, Rng rng) {
  MatX g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<MatX> qr(g);
  MatX q = qr.householderQ() * MatX::Identity(rows, cols);
  // Fix column signs so the construction is stable under library changes.
  for (Index j = 0; j < cols; ++j)
    if (q(0, j) < 0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

MatX3 BlendshapeModel::template_vertices() const {
  return Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 3, Eigen::RowMajor>>(
      template_flat.data(), vertex_count(), 3);
}

Mesh BlendshapeModel::template_mesh() const {
  Mesh m;
  m.vertices = template_vertices();
  m.topology = topology;
  return m;
}

Mesh synthesize_coarse(const BlendshapeModel& model, const VecX& s, const VecX& psi) {
  if (s.size() != model.shape_dim() || psi.size() != model.expr_dim())
    throw std::invalid_argument("synthesize_coarse: coefficient dimension mismatch");
  VecX flat = model.template_flat;
  if (s.size() > 0) flat.noalias() += model.shape_basis * (model.shape_spectrum.asDiagonal() * s);
  if (psi.size() > 0) flat.noalias() += model.expr_basis * (model.expr_spectrum.asDiagonal() * psi);
  Mesh m;
  m.vertices = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, 3, Eigen::RowMajor>>(
      flat.data(), model.vertex_count(), 3);
  m.topology = model.topology;
  return m;
}

void synthesize_coarse_bwd(const BlendshapeModel& model, const MatX3& dvertices, VecX& ds,
                           VecX& dpsi) {
  const Eigen::Matrix<Real, Eigen::Dynamic, 3, Eigen::RowMajor> row_major = dvertices;
  const Eigen::Map<const VecX> flat(row_major.data(), row_major.size());
  ds = model.shape_spectrum.asDiagonal() * (model.shape_basis.transpose() * flat);
  dpsi = model.expr_spectrum.asDiagonal() * (model.expr_basis.transpose() * flat);
}

void validate_model(const BlendshapeModel& model) {
  validate_topology(*model.topology);
  if (model.topology->vertex_count != model.vertex_count())
    throw std::invalid_argument("model: topology/template vertex count mismatch");
  for (Index j = 0; j < model.shape_dim(); ++j)
    if (std::abs(model.shape_basis.col(j).norm() - 1.0) > 1e-8)
      throw std::invalid_argument("model: shape basis column not unit norm");
  for (Index j = 0; j < model.expr_dim(); ++j)
    if (std::abs(model.expr_basis.col(j).norm() - 1.0) > 1e-8)
      throw std::invalid_argument("model: expr basis column not unit norm");
  const MatX gram = model.shape_basis.transpose() * model.shape_basis;
  if ((gram - MatX::Identity(model.shape_dim(), model.shape_dim())).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("model: shape basis columns not orthogonal");
}

Mesh make_icosphere(int subdivisions) {
  const SphereMesh sphere = subdivided_icosahedron(subdivisions);
  auto topo = std::make_shared<Topology>();
  topo->faces = sphere.faces;
  topo->vertex_count = sphere.vertices.rows();
  topo->uv.resize(sphere.vertices.rows(), 2);
  for (Index i = 0; i < sphere.vertices.rows(); ++i)
    topo->uv.row(i) = sphere_uv(sphere.vertices.row(i).transpose()).transpose();
  Mesh m;
  m.vertices = sphere.vertices;
  m.topology = std::move(topo);
  return m;
}

BlendshapeModel make_head_model(const HeadModelParams& params) {
  const SphereMesh sphere = subdivided_icosahedron(params.subdivisions);
  const Index n = sphere.vertices.rows();

  auto topo = std::make_shared<Topology>();
  topo->faces = sphere.faces;
  topo->vertex_count = n;
  topo->uv.resize(n, 2);
  for (Index i = 0; i < n; ++i)
    topo->uv.row(i) = sphere_uv(sphere.vertices.row(i).transpose()).transpose();
  topo->landmarks = pick_landmarks(sphere.vertices);

  BlendshapeModel model;
  model.topology = std::move(topo);
  model.template_flat.resize(3 * n);
  for (Index i = 0; i < n; ++i) {
    const Vec3 v = head_deform(sphere.vertices.row(i).transpose());
    model.template_flat.segment<3>(3 * i) = v;
  }

  const Rng root(params.seed);
  model.shape_basis = orthonormal_basis(3 * n, params.shape_dim, root.stream("shape_basis"));
  model.expr_basis = orthonormal_basis(3 * n, params.expr_dim, root.stream("expr_basis"));
  model.shape_spectrum.resize(params.shape_dim);
  for (Index k = 0; k < params.shape_dim; ++k) model.shape_spectrum[k] = 0.05 * std::pow(0.8, Real(k));
  model.expr_spectrum.resize(params.expr_dim);
  for (Index k = 0; k < params.expr_dim; ++k) model.expr_spectrum[k] = 0.05 * std::pow(0.8, Real(k));

  validate_model(model);
  return model;
}

}  // namespace facefit
