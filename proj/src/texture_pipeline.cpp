#include "facefit/texture_pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>

namespace facefit {

TextureExtractionResult sample_texture(const Image& image, const Mesh& mesh, const Pose& pose,
                                       const Camera& camera, const UVChart& chart) {
  const MaskGrid visible = extract_visibility(mesh, pose, camera, chart);
  const Mat3 rot = axis_angle_to_matrix(pose.rotation);

  // Coverage buffer so rim texels whose bilinear taps would mix background
  // pixels are rejected.
  const ProjectedVertices proj = project(mesh.vertices, pose, camera);
  RasterOptions ropts;
  ropts.sigma_px = 0.0;
  const FragmentBuffer fb = rasterize(proj, mesh.topology->faces, camera, ropts);
  auto taps_covered = [&](Real sx, Real sy) {
    const int x0 = std::min(std::max(static_cast<int>(sx - 0.5), 0), camera.width - 1);
    const int y0 = std::min(std::max(static_cast<int>(sy - 0.5), 0), camera.height - 1);
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const int x = std::min(x0 + dx, camera.width - 1);
        const int y = std::min(y0 + dy, camera.height - 1);
        if (fb.face[std::size_t(fb.idx(x, y))] < 0) return false;
      }
    return true;
  };

  TextureExtractionResult res;
  res.texture = ColorGrid(chart.n);
  res.filled_mask = MaskGrid(chart.n, false);
  res.interpolated_mask = MaskGrid(chart.n, false);
  res.blend_mask = MaskGrid(chart.n, false);

  const Topology& topo = *mesh.topology;
  for (Index t = 0; t < chart.texels(); ++t) {
    const int x = static_cast<int>(t % chart.n), y = static_cast<int>(t / chart.n);
    if (!visible.at(x, y)) continue;
    const std::int32_t f = chart.face[std::size_t(t)];
    const Vec3 w = chart.bary.row(t).transpose();
    Vec3 pos = Vec3::Zero();
    for (int j = 0; j < 3; ++j)
      pos += w[j] * mesh.vertices.row(topo.faces(f, j)).transpose();
    const Vec3 cam = rot * pos + pose.translation;
    Real sx, sy;
    if (camera.mode == Camera::Mode::kOrthographic) {
      sx = camera.principal.x() + camera.scale * cam.x();
      sy = camera.principal.y() - camera.scale * cam.y();
    } else {
      const Real dz = camera.distance - cam.z();
      if (dz <= 1e-6) continue;
      sx = camera.principal.x() + camera.focal * cam.x() / dz;
      sy = camera.principal.y() - camera.focal * cam.y() / dz;
    }
    if (sx < 0 || sx > camera.width || sy < 0 || sy > camera.height) continue;
    if (!taps_covered(sx, sy)) continue;
    res.texture.set(x, y, image.sample(sx, sy));
    res.filled_mask.set(x, y, true);
  }
  if (res.filled_mask.count() == 0)
    std::fprintf(stderr, "facefit: sample_texture produced an empty mask (mesh outside frame?)\n");
  return res;
}

ColorGrid fill_missing(const ColorGrid& texture, const MaskGrid& valid, int max_sweeps,
                       Real tolerance) {
  const int n = texture.size();
  if (valid.count() == 0) throw std::invalid_argument("fill_missing: no valid texels");
  if (Index(valid.count()) == texture.texels()) return texture;

  // Start unknown texels at the valid mean so every iterate stays a convex
  // combination of valid values (discrete maximum principle).
  Vec3 mean = Vec3::Zero();
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (valid.at(x, y)) mean += texture.at(x, y);
  mean /= static_cast<Real>(valid.count());

  ColorGrid cur = texture;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (!valid.at(x, y)) cur.set(x, y, mean);

  ColorGrid next = cur;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Real max_delta = 0;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        if (valid.at(x, y)) continue;
        Vec3 acc = Vec3::Zero();
        int count = 0;
        if (x > 0) { acc += cur.at(x - 1, y); ++count; }
        if (x < n - 1) { acc += cur.at(x + 1, y); ++count; }
        if (y > 0) { acc += cur.at(x, y - 1); ++count; }
        if (y < n - 1) { acc += cur.at(x, y + 1); ++count; }
        const Vec3 v = acc / count;
        max_delta = std::max(max_delta, (v - cur.at(x, y)).cwiseAbs().maxCoeff());
        next.set(x, y, v);
      }
    std::swap(cur, next);
    if (max_delta < tolerance) break;
  }
  return cur;
}

FlipBlendResult flip_blend(const ColorGrid& texture, const MaskGrid& valid,
                           const ColorGrid& mirrored, const MaskGrid& mirrored_valid,
                           const std::vector<std::int32_t>& uv_mirror_map) {
  const int n = texture.size();
  if (Index(uv_mirror_map.size()) != texture.texels())
    throw std::invalid_argument("flip_blend: mirror map size mismatch");

  auto mirror_at = [&](Index t, bool& ok) -> Vec3 {
    const std::int32_t m = uv_mirror_map[std::size_t(t)];
    if (m < 0) {
      ok = false;
      return Vec3::Zero();
    }
    const int mx = static_cast<int>(m % n), my = static_cast<int>(m / n);
    ok = mirrored_valid.at(mx, my);
    return mirrored.at(mx, my);
  };

  // Chebyshev distance from each texel to the nearest invalid-original texel.
  const int feather = std::max(1, static_cast<int>(std::lround(4.0 * n / 256.0)));
  std::vector<int> dist(std::size_t(n) * n, std::numeric_limits<int>::max());
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (!valid.at(x, y)) {
        dist[std::size_t(y) * n + x] = 0;
        queue.emplace_back(x, y);
      }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    const int d = dist[std::size_t(y) * n + x];
    if (d >= feather) continue;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= n || ny < 0 || ny >= n) continue;
        if (dist[std::size_t(ny) * n + nx] > d + 1) {
          dist[std::size_t(ny) * n + nx] = d + 1;
          queue.emplace_back(nx, ny);
        }
      }
  }

  FlipBlendResult res;
  res.texture = texture;
  res.valid = valid;
  res.blend_mask = MaskGrid(n, false);
  for (Index t = 0; t < texture.texels(); ++t) {
    const int x = static_cast<int>(t % n), y = static_cast<int>(t / n);
    bool mirror_ok = false;
    const Vec3 mv = mirror_at(t, mirror_ok);
    if (!valid.at(x, y)) {
      if (mirror_ok) {
        res.texture.set(x, y, mv);
        res.valid.set(x, y, true);
        res.blend_mask.set(x, y, true);
      }
      continue;
    }
    const int d = dist[std::size_t(t)];
    if (d < feather && mirror_ok) {
      const Real alpha = static_cast<Real>(d) / feather;
      res.texture.set(x, y, alpha * texture.at(x, y) + (1.0 - alpha) * mv);
    }
  }
  return res;
}

GtAlbedoResult build_gt_albedo(const Image& image, const Mesh& mesh, const Pose& pose,
                               const Camera& camera, const UVChart& chart) {
  const TextureExtractionResult sampled = sample_texture(image, mesh, pose, camera, chart);
  const FlipBlendResult blended = flip_blend(sampled.texture, sampled.filled_mask,
                                             sampled.texture, sampled.filled_mask, chart.mirror);

  // Texels outside the chart are filled too; they carry no surface but keep
  // the diffusion from dragging zeros into the chart boundary.
  const MaskGrid coverage = chart.coverage();
  const ColorGrid full = fill_missing(blended.texture, blended.valid);

  NormalGrid normals = chart_normals(chart, *mesh.topology, mesh.vertices);
  const Mat3 rot = axis_angle_to_matrix(pose.rotation);
  normals.normals = normals.normals * rot.transpose();

  const LightEstimate est = estimate_sh_lighting(full, normals, sampled.filled_mask);
  const ColorGrid shading = shading_from_normals(normals, est.light);
  AlbedoResult albedo = albedo_from_texture(full, shading);

  GtAlbedoResult res;
  res.albedo = std::move(albedo.albedo);
  res.light = est.light;
  res.light_residual_rms = est.residual_rms.mean();
  res.light_condition = est.condition;
  res.visible = sampled.filled_mask;
  res.sampled_texels = sampled.filled_mask.count();
  res.mirrored_texels = blended.blend_mask.count();
  Index interp = 0;
  for (int y = 0; y < chart.n; ++y)
    for (int x = 0; x < chart.n; ++x)
      if (coverage.at(x, y) && !blended.valid.at(x, y)) ++interp;
  res.interpolated_texels = interp;
  return res;
}

std::string GtAlbedoResult::report_json() const {
  nlohmann::json j;
  j["sampled_texels"] = sampled_texels;
  j["mirrored_texels"] = mirrored_texels;
  j["interpolated_texels"] = interpolated_texels;
  j["light_residual_rms"] = light_residual_rms;
  j["light_condition"] = light_condition;
  std::vector<std::vector<Real>> coeffs(9, std::vector<Real>(3));
  for (int b = 0; b < 9; ++b)
    for (int c = 0; c < 3; ++c) coeffs[std::size_t(b)][std::size_t(c)] = light.coefficients(b, c);
  j["light"] = coeffs;
  return j.dump(2);
}

}  // namespace facefit
