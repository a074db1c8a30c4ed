#include "facefit/uv_chart.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace facefit {

namespace {

inline Real cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Barycentrics of p in (a,b,c); returns false for degenerate triangles.
bool uv_barycentrics(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c, Vec3& w) {
  const Real area = cross2(b - a, c - a);
  if (std::abs(area) < 1e-18) return false;
  w[0] = cross2(b - p, c - p) / area;
  w[1] = cross2(c - p, a - p) / area;
  w[2] = cross2(a - p, b - p) / area;
  return true;
}

// Coarse spatial hash over 3D points for nearest-texel queries.
struct PointGrid {
  explicit PointGrid(Real cell) : cell_(cell) {}

  void insert(const Vec3& p, std::int32_t id) {
    cells_[key(p)].push_back({p, id});
  }

  std::int32_t nearest(const Vec3& p) const {
    std::int32_t best = -1;
    Real best_d2 = std::numeric_limits<Real>::infinity();
    const auto base = coords(p);
    for (int r = 1; r <= 4 && best < 0; ++r) {  // expand search if empty nearby
      for (int dz = -r; dz <= r; ++dz)
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            auto it = cells_.find(pack(base[0] + dx, base[1] + dy, base[2] + dz));
            if (it == cells_.end()) continue;
            for (const auto& e : it->second) {
              const Real d2 = (e.first - p).squaredNorm();
              if (d2 < best_d2) {
                best_d2 = d2;
                best = e.second;
              }
            }
          }
    }
    return best;
  }

 private:
  std::array<int, 3> coords(const Vec3& p) const {
    return {static_cast<int>(std::floor(p.x() / cell_)),
            static_cast<int>(std::floor(p.y() / cell_)),
            static_cast<int>(std::floor(p.z() / cell_))};
  }
  std::int64_t key(const Vec3& p) const {
    const auto c = coords(p);
    return pack(c[0], c[1], c[2]);
  }
  static std::int64_t pack(int x, int y, int z) {
    return (std::int64_t(x + 2048) << 40) | (std::int64_t(y + 2048) << 20) | std::int64_t(z + 2048);
  }
  Real cell_;
  std::unordered_map<std::int64_t, std::vector<std::pair<Vec3, std::int32_t>>> cells_;
};

}  // namespace

MaskGrid UVChart::coverage() const {
  MaskGrid m(n, false);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) m.set(x, y, covered(x, y));
  return m;
}

UVChart build_uv_chart(const Topology& topo, const MatX3& reference_vertices, int resolution) {
  UVChart chart;
  chart.n = resolution;
  chart.face.assign(std::size_t(chart.texels()), -1);
  chart.bary = MatX3::Zero(chart.texels(), 3);
  chart.rest_position = MatX3::Zero(chart.texels(), 3);
  chart.mirror.assign(std::size_t(chart.texels()), -1);

  // Front faces first so they own contested texels (the equidistant chart
  // can fold triangles at the very back of the head).
  std::vector<Index> order(std::size_t(topo.faces.rows()));
  std::iota(order.begin(), order.end(), Index(0));
  std::vector<Real> depth_key(order.size());
  for (Index f = 0; f < topo.faces.rows(); ++f)
    depth_key[std::size_t(f)] = reference_vertices(topo.faces(f, 0), 2) +
                                reference_vertices(topo.faces(f, 1), 2) +
                                reference_vertices(topo.faces(f, 2), 2);
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return depth_key[std::size_t(a)] > depth_key[std::size_t(b)]; });

  const int n = resolution;
  for (Index of = 0; of < Index(order.size()); ++of) {
    const Index f = order[std::size_t(of)];
    const Vec2 a = topo.uv.row(topo.faces(f, 0)).transpose();
    const Vec2 b = topo.uv.row(topo.faces(f, 1)).transpose();
    const Vec2 c = topo.uv.row(topo.faces(f, 2)).transpose();
    const Real u_min = std::min({a.x(), b.x(), c.x()}), u_max = std::max({a.x(), b.x(), c.x()});
    const Real v_min = std::min({a.y(), b.y(), c.y()}), v_max = std::max({a.y(), b.y(), c.y()});
    const int x0 = std::max(0, static_cast<int>(std::floor(u_min * n - 0.5)));
    const int x1 = std::min(n - 1, static_cast<int>(std::ceil(u_max * n - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(v_min * n - 0.5)));
    const int y1 = std::min(n - 1, static_cast<int>(std::ceil(v_max * n - 0.5)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const std::size_t t = std::size_t(y) * n + x;
        if (chart.face[t] >= 0) continue;
        const Vec2 p((x + 0.5) / n, (y + 0.5) / n);
        Vec3 w;
        if (!uv_barycentrics(p, a, b, c, w)) continue;
        if (w.minCoeff() < -1e-9) continue;
        chart.face[t] = static_cast<std::int32_t>(f);
        chart.bary.row(Index(t)) = w.transpose();
        chart.rest_position.row(Index(t)) = w[0] * reference_vertices.row(topo.faces(f, 0)) +
                                            w[1] * reference_vertices.row(topo.faces(f, 1)) +
                                            w[2] * reference_vertices.row(topo.faces(f, 2));
      }
  }

  // Bilateral mirror: nearest covered texel to the x-negated surface point,
  // then symmetrized so the pairing is an exact involution.
  PointGrid grid(0.08);
  for (Index t = 0; t < chart.texels(); ++t)
    if (chart.face[std::size_t(t)] >= 0)
      grid.insert(chart.rest_position.row(t).transpose(), static_cast<std::int32_t>(t));
  for (Index t = 0; t < chart.texels(); ++t) {
    if (chart.face[std::size_t(t)] < 0) continue;
    Vec3 p = chart.rest_position.row(t).transpose();
    p.x() = -p.x();
    chart.mirror[std::size_t(t)] = grid.nearest(p);
  }
  for (Index t = 0; t < chart.texels(); ++t) {
    const std::int32_t m = chart.mirror[std::size_t(t)];
    if (m < 0) continue;
    if (chart.mirror[std::size_t(m)] != static_cast<std::int32_t>(t))
      chart.mirror[std::size_t(t)] = static_cast<std::int32_t>(t);  // on-plane fallback
  }
  return chart;
}

MatX3 chart_positions(const UVChart& chart, const Topology& topo, const MatX3& vertices) {
  MatX3 out = MatX3::Zero(chart.texels(), 3);
  for (Index t = 0; t < chart.texels(); ++t) {
    const std::int32_t f = chart.face[std::size_t(t)];
    if (f < 0) continue;
    const Vec3 w = chart.bary.row(t).transpose();
    out.row(t) = w[0] * vertices.row(topo.faces(f, 0)) + w[1] * vertices.row(topo.faces(f, 1)) +
                 w[2] * vertices.row(topo.faces(f, 2));
  }
  return out;
}

NormalGrid chart_normals(const UVChart& chart, const Topology& topo, const MatX3& vertices) {
  const MatX3 vn = vertex_normals(vertices, topo.faces);
  NormalGrid grid;
  grid.n = chart.n;
  grid.normals = MatX3::Zero(chart.texels(), 3);
  grid.valid = MaskGrid(chart.n, false);
  for (Index t = 0; t < chart.texels(); ++t) {
    const std::int32_t f = chart.face[std::size_t(t)];
    if (f < 0) {
      grid.normals.row(t) = Vec3(0, 0, 1).transpose();
      continue;
    }
    const Vec3 w = chart.bary.row(t).transpose();
    Vec3 nrm = w[0] * vn.row(topo.faces(f, 0)).transpose() +
               w[1] * vn.row(topo.faces(f, 1)).transpose() +
               w[2] * vn.row(topo.faces(f, 2)).transpose();
    const Real len = nrm.norm();
    grid.normals.row(t) = (len > 1e-12 ? (nrm / len) : Vec3(0, 0, 1)).transpose();
    grid.valid.set(static_cast<int>(t % chart.n), static_cast<int>(t / chart.n), true);
  }
  return grid;
}

}  // namespace facefit
