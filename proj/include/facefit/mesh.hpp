#pragma once

#include "facefit/grids.hpp"
#include "facefit/types.hpp"

#include <memory>
#include <vector>

namespace facefit {

// Connectivity, UV chart and landmark indices shared by every mesh a model
// synthesizes. Synthesized meshes hold a pointer to the same instance, which
// is what makes the shared-topology contract checkable.
struct Topology {
  FaceMat faces;               // triangle vertex indices, outward winding
  MatX2 uv;                    // per-vertex texture coordinates in [0,1]^2
  std::vector<int> landmarks;  // 68 distinct vertex indices

  Index vertex_count = 0;
};

struct Mesh {
  MatX3 vertices;
  std::shared_ptr<const Topology> topology;

  Index vertex_count() const { return vertices.rows(); }
  const FaceMat& faces() const { return topology->faces; }
  const MatX2& uv() const { return topology->uv; }
  const std::vector<int>& landmarks() const { return topology->landmarks; }

  MatX2 landmark_uv() const;
  MatX3 landmark_positions() const;
};

void validate_topology(const Topology& topo);

// Axis-angle rotation in radians; magnitude kept below pi by construction.
struct Pose {
  Pose() = default;
  Pose(const Vec3& rot, const Vec3& trans) : rotation(canonical_axis_angle(rot)), translation(trans) {}

  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  static Vec3 canonical_axis_angle(Vec3 w);

  // Mirrored pose across the x=0 plane (used by the symmetry loss).
  Pose flipped() const {
    Pose p;
    p.rotation = Vec3(rotation.x(), -rotation.y(), -rotation.z());
    p.translation = Vec3(-translation.x(), translation.y(), translation.z());
    return p;
  }
};

Mat3 axis_angle_to_matrix(const Vec3& w);

// Adjoint of axis_angle_to_matrix: accumulates d(loss)/dw given d(loss)/dR.
Vec3 axis_angle_backward(const Vec3& w, const Mat3& dR);

// Angle in radians between two axis-angle rotations.
Real rotation_angle_between(const Vec3& wa, const Vec3& wb);

// Area-weighted per-vertex unit normals. Degenerate faces contribute zero;
// vertices with no usable face get +z (counted in fallback_count).
MatX3 vertex_normals(const MatX3& vertices, const FaceMat& faces, int* fallback_count = nullptr);
inline MatX3 vertex_normals(const Mesh& mesh, int* fallback_count = nullptr) {
  return vertex_normals(mesh.vertices, mesh.faces(), fallback_count);
}

// Adjoint of vertex_normals: given d(loss)/d(normals), accumulate into
// d(loss)/d(vertices). `raw` is the unnormalized accumulator from the
// forward pass (returned by vertex_normals_fwd).
struct NormalsForward {
  MatX3 raw;      // accumulated face cross products per vertex
  MatX3 normals;  // normalized (with +z fallback)
};
NormalsForward vertex_normals_fwd(const MatX3& vertices, const FaceMat& faces);
void vertex_normals_bwd(const MatX3& vertices, const FaceMat& faces, const NormalsForward& fwd,
                        const MatX3& dnormals, MatX3& dvertices);

// Scalar UV displacement field, values clamped to +-kDisplacementLimit.
class DisplacementMap {
 public:
  DisplacementMap() = default;
  explicit DisplacementMap(int n) : grid_(n, 0.0) {}
  explicit DisplacementMap(ScalarGrid grid) : grid_(std::move(grid)) { clamp(); }

  int size() const { return grid_.size(); }
  const ScalarGrid& grid() const { return grid_; }
  ScalarGrid& grid() { return grid_; }
  void clamp() { grid_.clamp(-kDisplacementLimit, kDisplacementLimit); }
  Real sample(Real u, Real v) const { return grid_.sample(u, v); }

 private:
  ScalarGrid grid_;
};

// Offsets every vertex along its normal by the displacement sampled at its
// uv coordinate. Topology is shared with the input.
Mesh apply_displacement(const Mesh& mesh, const DisplacementMap& d);

}  // namespace facefit
