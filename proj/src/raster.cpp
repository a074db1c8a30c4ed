#include "facefit/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace facefit {

namespace {

inline Real cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Real point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b, Real* t_out) {
  const Vec2 ab = b - a;
  const Real len2 = ab.squaredNorm();
  Real t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::min(std::max(t, Real(0)), Real(1));
  if (t_out) *t_out = t;
  return (p - (a + t * ab)).norm();
}

}  // namespace

Real signed_triangle_distance(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c,
                              Vec3* closest_bary) {
  const Real area = cross2(b - a, c - a);
  const Real w0 = cross2(b - p, c - p);
  const Real w1 = cross2(c - p, a - p);
  const Real w2 = cross2(a - p, b - p);
  const bool inside = area != 0 && ((w0 >= 0 && w1 >= 0 && w2 >= 0 && area > 0) ||
                                    (w0 <= 0 && w1 <= 0 && w2 <= 0 && area < 0));
  Real t01, t12, t20;
  const Real d01 = point_segment_distance(p, a, b, &t01);
  const Real d12 = point_segment_distance(p, b, c, &t12);
  const Real d20 = point_segment_distance(p, c, a, &t20);
  Real d = d01;
  Vec3 bary(1 - t01, t01, 0);
  if (d12 < d) {
    d = d12;
    bary = Vec3(0, 1 - t12, t12);
  }
  if (d20 < d) {
    d = d20;
    bary = Vec3(t20, 0, 1 - t20);
  }
  if (inside && closest_bary) {
    *closest_bary = Vec3(w0 / area, w1 / area, w2 / area);
  } else if (closest_bary) {
    *closest_bary = bary;
  }
  return inside ? d : -d;
}

FragmentBuffer rasterize(const ProjectedVertices& projected, const FaceMat& faces,
                         const Camera& camera, const RasterOptions& opts) {
  FragmentBuffer fb;
  fb.width = camera.width;
  fb.height = camera.height;
  fb.face.assign(std::size_t(fb.pixels()), -1);
  fb.bary = MatX3::Zero(fb.pixels(), 3);
  fb.depth = VecX::Constant(fb.pixels(), std::numeric_limits<Real>::infinity());
  fb.coverage = VecX::Zero(fb.pixels());
  fb.band_face.assign(std::size_t(fb.pixels()), -1);
  fb.band_bary = MatX3::Zero(fb.pixels(), 3);
  fb.band_distance = VecX::Constant(fb.pixels(), -std::numeric_limits<Real>::infinity());

  const bool perspective = camera.mode == Camera::Mode::kPerspective;

  for (Index f = 0; f < faces.rows(); ++f) {
    const int ia = faces(f, 0), ib = faces(f, 1), ic = faces(f, 2);
    if (!projected.behind.empty() &&
        (projected.behind[ia] || projected.behind[ib] || projected.behind[ic]))
      continue;
    const Vec2 a = projected.screen.row(ia).transpose();
    const Vec2 b = projected.screen.row(ib).transpose();
    const Vec2 c = projected.screen.row(ic).transpose();
    const Real area = cross2(b - a, c - a);
    if (area == 0.0) continue;  // zero-area screen triangle

    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5)));
    const int x1 = std::min(fb.width - 1,
                            static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5)));
    const int y1 = std::min(fb.height - 1,
                            static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p(x + 0.5, y + 0.5);
        const Real w0 = cross2(b - p, c - p) / area;
        const Real w1 = cross2(c - p, a - p) / area;
        const Real w2 = cross2(a - p, b - p) / area;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        Vec3 w(w0, w1, w2);
        if (perspective) {
          // Perspective-correct attribute weights.
          Vec3 wp(w0 / projected.depth[ia], w1 / projected.depth[ib], w2 / projected.depth[ic]);
          w = wp / wp.sum();
        }
        const Real depth = w0 * projected.depth[ia] + w1 * projected.depth[ib] +
                           w2 * projected.depth[ic];
        const Index px = fb.idx(x, y);
        if (depth < fb.depth[px]) {
          fb.depth[px] = depth;
          fb.face[std::size_t(px)] = static_cast<std::int32_t>(f);
          fb.bary.row(px) = w.transpose();
        }
      }
  }

  for (Index px = 0; px < fb.pixels(); ++px)
    if (fb.face[std::size_t(px)] >= 0) fb.coverage[px] = 1.0;

  // Soft silhouette band: for uncovered pixels near any triangle, keep the
  // least-negative signed distance and the closest point on that triangle.
  if (opts.sigma_px > 0) {
    const Real pad = opts.band_cutoff * opts.sigma_px;
    for (Index f = 0; f < faces.rows(); ++f) {
      const int ia = faces(f, 0), ib = faces(f, 1), ic = faces(f, 2);
      if (!projected.behind.empty() &&
          (projected.behind[ia] || projected.behind[ib] || projected.behind[ic]))
        continue;
      const Vec2 a = projected.screen.row(ia).transpose();
      const Vec2 b = projected.screen.row(ib).transpose();
      const Vec2 c = projected.screen.row(ic).transpose();
      if (cross2(b - a, c - a) == 0.0) continue;
      const int x0 = std::max(
          0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}) - 0.5 - pad)));
      const int x1 = std::min(
          fb.width - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}) - 0.5 + pad)));
      const int y0 = std::max(
          0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}) - 0.5 - pad)));
      const int y1 = std::min(
          fb.height - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}) - 0.5 + pad)));
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const Index px = fb.idx(x, y);
          if (fb.face[std::size_t(px)] >= 0) continue;
          const Vec2 p(x + 0.5, y + 0.5);
          Vec3 cb;
          const Real d = signed_triangle_distance(p, a, b, c, &cb);
          if (d > fb.band_distance[px]) {
            fb.band_distance[px] = d;
            fb.band_face[std::size_t(px)] = static_cast<std::int32_t>(f);
            fb.band_bary.row(px) = cb.transpose();
          }
        }
    }
    for (Index px = 0; px < fb.pixels(); ++px) {
      if (fb.face[std::size_t(px)] >= 0 || fb.band_face[std::size_t(px)] < 0) continue;
      const Real d = fb.band_distance[px];
      if (d < -pad) {
        fb.band_face[std::size_t(px)] = -1;
        continue;
      }
      fb.coverage[px] = 1.0 / (1.0 + std::exp(-d / opts.sigma_px));
    }
  }
  return fb;
}

}  // namespace facefit
