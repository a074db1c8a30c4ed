#include "facefit/mesh.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <set>
#include <stdexcept>

namespace facefit {

MatX2 Mesh::landmark_uv() const {
  MatX2 out(Index(landmarks().size()), 2);
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = uv().row(landmarks()[i]);
  return out;
}

MatX3 Mesh::landmark_positions() const {
  MatX3 out(Index(landmarks().size()), 3);
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = vertices.row(landmarks()[i]);
  return out;
}

void validate_topology(const Topology& topo) {
  if (topo.faces.size() > 0 && (topo.faces.minCoeff() < 0 || topo.faces.maxCoeff() >= topo.vertex_count))
    throw std::invalid_argument("topology: face index out of range");
  if (topo.uv.rows() != topo.vertex_count)
    throw std::invalid_argument("topology: uv count does not match vertex count");
  if (topo.uv.size() > 0 && (topo.uv.minCoeff() < 0.0 || topo.uv.maxCoeff() > 1.0))
    throw std::invalid_argument("topology: uv outside [0,1]");
  std::set<int> seen(topo.landmarks.begin(), topo.landmarks.end());
  if (seen.size() != topo.landmarks.size())
    throw std::invalid_argument("topology: duplicate landmark indices");
  for (int l : topo.landmarks)
    if (l < 0 || l >= topo.vertex_count) throw std::invalid_argument("topology: landmark out of range");
}

Vec3 Pose::canonical_axis_angle(Vec3 w) {
  Real theta = w.norm();
  if (theta < 1e-300) return Vec3::Zero();
  // Wrap the angle into (-pi, pi]; the representative keeps theta in [0, pi].
  Real wrapped = std::fmod(theta, 2.0 * M_PI);
  if (wrapped > M_PI) wrapped -= 2.0 * M_PI;
  return w * (wrapped / theta);
}

Mat3 axis_angle_to_matrix(const Vec3& w) {
  const Real theta = w.norm();
  Mat3 K;
  K << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  if (theta < 1e-12) return Mat3::Identity() + K;  // first-order fallback
  const Real a = std::sin(theta) / theta;
  const Real b = (1.0 - std::cos(theta)) / (theta * theta);
  return Mat3::Identity() + a * K + b * (K * K);
}

Vec3 axis_angle_backward(const Vec3& w, const Mat3& dR) {
  // dL/dw_i = sum(dR .* dR/dw_i), with dR/dw_i from Gallego & Yezzi:
  //   dR/dw_i = (w_i [w]x + [w x (I - R) e_i]x) / |w|^2 * R
  const Real theta2 = w.squaredNorm();
  Vec3 out = Vec3::Zero();
  if (theta2 < 1e-16) {
    // R ~ I + [w]x near zero, so dR/dw_i = [e_i]x.
    out.x() = dR(2, 1) - dR(1, 2);
    out.y() = dR(0, 2) - dR(2, 0);
    out.z() = dR(1, 0) - dR(0, 1);
    return out;
  }
  const Mat3 R = axis_angle_to_matrix(w);
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = 1.0;
    const Vec3 v = w.cross((Mat3::Identity() - R) * e);
    Mat3 A;
    A << 0, -(w[i] * w.z() + v.z()), (w[i] * w.y() + v.y()),
        (w[i] * w.z() + v.z()), 0, -(w[i] * w.x() + v.x()),
        -(w[i] * w.y() + v.y()), (w[i] * w.x() + v.x()), 0;
    const Mat3 dRdwi = (A / theta2) * R;
    out[i] = (dR.array() * dRdwi.array()).sum();
  }
  return out;
}

Real rotation_angle_between(const Vec3& wa, const Vec3& wb) {
  const Mat3 Rel = axis_angle_to_matrix(wa).transpose() * axis_angle_to_matrix(wb);
  Real c = (Rel.trace() - 1.0) / 2.0;
  c = std::min(std::max(c, Real(-1)), Real(1));
  return std::acos(c);
}

NormalsForward vertex_normals_fwd(const MatX3& vertices, const FaceMat& faces) {
  NormalsForward fwd;
  fwd.raw = MatX3::Zero(vertices.rows(), 3);
  for (Index f = 0; f < faces.rows(); ++f) {
    const Vec3 a = vertices.row(faces(f, 0));
    const Vec3 b = vertices.row(faces(f, 1));
    const Vec3 c = vertices.row(faces(f, 2));
    const Vec3 fn = (b - a).cross(c - a);  // length = 2 * area
    fwd.raw.row(faces(f, 0)) += fn.transpose();
    fwd.raw.row(faces(f, 1)) += fn.transpose();
    fwd.raw.row(faces(f, 2)) += fn.transpose();
  }
  fwd.normals.resize(vertices.rows(), 3);
  for (Index i = 0; i < vertices.rows(); ++i) {
    const Real len = fwd.raw.row(i).norm();
    if (len < 1e-20)
      fwd.normals.row(i) = Vec3(0, 0, 1).transpose();
    else
      fwd.normals.row(i) = fwd.raw.row(i) / len;
  }
  return fwd;
}

MatX3 vertex_normals(const MatX3& vertices, const FaceMat& faces, int* fallback_count) {
  NormalsForward fwd = vertex_normals_fwd(vertices, faces);
  if (fallback_count) {
    *fallback_count = 0;
    for (Index i = 0; i < vertices.rows(); ++i)
      if (fwd.raw.row(i).norm() < 1e-20) ++*fallback_count;
  }
  return fwd.normals;
}

void vertex_normals_bwd(const MatX3& vertices, const FaceMat& faces, const NormalsForward& fwd,
                        const MatX3& dnormals, MatX3& dvertices) {
  // Through the normalization: dm = (I - n n^T)/|m| dn; fallback rows get none.
  MatX3 draw(vertices.rows(), 3);
  for (Index i = 0; i < vertices.rows(); ++i) {
    const Real len = fwd.raw.row(i).norm();
    if (len < 1e-20) {
      draw.row(i).setZero();
      continue;
    }
    const Vec3 n = fwd.normals.row(i).transpose();
    const Vec3 dn = dnormals.row(i).transpose();
    draw.row(i) = ((dn - n * n.dot(dn)) / len).transpose();
  }
  // Through each face's cross product; the same cross was added to all three
  // corners, so their cotangents sum.
  for (Index f = 0; f < faces.rows(); ++f) {
    const int ia = faces(f, 0), ib = faces(f, 1), ic = faces(f, 2);
    const Vec3 a = vertices.row(ia), b = vertices.row(ib), c = vertices.row(ic);
    const Vec3 g = (draw.row(ia) + draw.row(ib) + draw.row(ic)).transpose();
    const Vec3 u = b - a, w = c - a;
    const Vec3 du = w.cross(g);
    const Vec3 dw = g.cross(u);
    dvertices.row(ib) += du.transpose();
    dvertices.row(ic) += dw.transpose();
    dvertices.row(ia) -= (du + dw).transpose();
  }
}

Mesh apply_displacement(const Mesh& mesh, const DisplacementMap& d) {
  if (mesh.uv().rows() != mesh.vertex_count())
    throw std::invalid_argument("apply_displacement: mesh lacks per-vertex uv");
  const MatX3 normals = vertex_normals(mesh);
  Mesh out;
  out.topology = mesh.topology;
  out.vertices = mesh.vertices;
  for (Index i = 0; i < mesh.vertex_count(); ++i) {
    const Real offset = d.sample(mesh.uv()(i, 0), mesh.uv()(i, 1));
    out.vertices.row(i) += offset * normals.row(i);
  }
  return out;
}

}  // namespace facefit
