#pragma once

#include "facefit/lighting.hpp"
#include "facefit/mesh.hpp"
#include "facefit/types.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace facefit {

// Texel-to-surface correspondence for a fixed topology at one resolution:
// each covered texel stores the face whose UV triangle contains its center
// plus the barycentric coordinates there. `mirror` is the involutive texel
// pairing induced by the template's bilateral symmetry.
struct UVChart {
  int n = 0;
  std::vector<std::int32_t> face;    // -1 where uncovered
  MatX3 bary;                        // texels x 3
  MatX3 rest_position;               // surface point on the reference vertices
  std::vector<std::int32_t> mirror;  // texel index, always an involution

  Index texels() const { return Index(n) * n; }
  bool covered(int x, int y) const { return face[std::size_t(y) * n + x] >= 0; }
  MaskGrid coverage() const;
};

// Builds the chart over `reference` vertices (normally the template). When
// UV triangles overlap, faces whose reference centroid has larger z win, so
// the face region always owns its texels.
UVChart build_uv_chart(const Topology& topo, const MatX3& reference_vertices, int resolution);

// Surface point of each covered texel on arbitrary vertices of the same topology.
MatX3 chart_positions(const UVChart& chart, const Topology& topo, const MatX3& vertices);

// Interpolated unit normals per covered texel.
NormalGrid chart_normals(const UVChart& chart, const Topology& topo, const MatX3& vertices);

}  // namespace facefit
