#pragma once

#include "facefit/camera.hpp"
#include "facefit/types.hpp"

#include <cstdint>
#include <vector>

namespace facefit {

// Per-pixel rasterization output. Barycentrics are the screen-space weights
// of the winning triangle (perspective-corrected in perspective mode);
// coverage is 1 on covered pixels and decays through the soft silhouette
// band outside.
struct FragmentBuffer {
  int width = 0, height = 0;
  std::vector<std::int32_t> face;  // -1 where empty
  MatX3 bary;
  VecX depth;
  VecX coverage;
  // Soft band bookkeeping for uncovered pixels near the silhouette.
  std::vector<std::int32_t> band_face;
  MatX3 band_bary;        // barycentrics of the closest point on the triangle
  VecX band_distance;     // signed pixel distance to the triangle (negative outside)

  Index pixels() const { return Index(width) * height; }
  Index idx(int x, int y) const { return Index(y) * width + x; }
  bool covered(int x, int y) const { return face[std::size_t(idx(x, y))] >= 0; }
};

struct RasterOptions {
  Real sigma_px = 1.0;      // silhouette softness; <= 0 disables the band
  Real band_cutoff = 4.0;   // band half-width in sigmas
};

// Z-buffered triangle rasterization over pixel centers. Zero-area screen
// triangles and (in perspective) triangles touching behind-camera vertices
// are skipped.
FragmentBuffer rasterize(const ProjectedVertices& projected, const FaceMat& faces,
                         const Camera& camera, const RasterOptions& opts = {});

// Signed 2D distance from p to triangle (a, b, c): positive inside,
// negative outside; `closest_bary` receives the barycentrics of the closest
// point (clamped to the triangle).
Real signed_triangle_distance(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c,
                              Vec3* closest_bary = nullptr);

}  // namespace facefit
