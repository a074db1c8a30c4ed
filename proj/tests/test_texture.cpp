#include "facefit/noise.hpp"
#include "facefit/texture_pipeline.hpp"
#include "facefit/rng.hpp"

#include "texscene.hpp"

#include <doctest.h>

#include <cmath>

using namespace facefit;

using texscene::TexScene;
using texscene::make_tex_scene;

namespace {
Mesh scene_mesh(const TexScene& ts) {
  return synthesize_coarse(ts.model, ts.scene.s, ts.scene.psi);
}
}  // namespace

TEST_SUITE_BEGIN("texture");

TEST_CASE("sample_texture: render-then-sample recovers albedo times shading") {
  const TexScene ts = make_tex_scene(21, false, 0.0);
  const Mesh mesh = scene_mesh(ts);
  const RenderedImage ren = render(ts.scene, ts.camera);
  const TextureExtractionResult res =
      sample_texture(ren.image, mesh, ts.scene.pose, ts.camera, ts.chart);

  const NormalGrid normals = ts.posed_chart_normals();

  CHECK(res.filled_mask.count() > 450);
  Real err_sum = 0;
  Index count = 0;
  for (Index t = 0; t < ts.chart.texels(); ++t) {
    const int x = static_cast<int>(t % 64), y = static_cast<int>(t / 64);
    if (!res.filled_mask.at(x, y)) continue;
    const Real u = (x + 0.5) / 64.0, v = (y + 0.5) / 64.0;
    const Vec3 albedo = ts.scene.albedo.sample(u, v);
    const Vec3 shade =
        ts.scene.light.shade(sh_basis(normals.normals.row(t).transpose())).cwiseMax(0.0);
    const Vec3 expected = (albedo.array() * shade.array()).matrix().cwiseMin(1.0);
    err_sum += (res.texture.at(x, y) - expected).cwiseAbs().mean();
    ++count;
  }
  CHECK(err_sum / count < 0.02);
}

TEST_CASE("sample_texture: fully back-facing mesh yields an empty mask") {
  const TexScene ts = make_tex_scene(22, false, 0.0);
  const Mesh mesh = scene_mesh(ts);
  Image blank(256, 256, Vec3(0.5, 0.5, 0.5));
  // keep only back-facing texels in view by turning the head fully around
  const Pose myturn(Vec3(0, M_PI, 0), Vec3::Zero());
  const TextureExtractionResult res = sample_texture(blank, mesh, myturn, ts.camera, ts.chart);
  // the front chart region (the face) is now invisible
  Index face_region_valid = 0;
  for (Index t = 0; t < ts.chart.texels(); ++t) {
    if (ts.chart.face[std::size_t(t)] < 0) continue;
    if (ts.chart.rest_position(t, 2) < 0.3) continue;
    if (res.filled_mask.at(static_cast<int>(t % 64), static_cast<int>(t / 64)))
      ++face_region_valid;
  }
  CHECK(face_region_valid == 0);
}

TEST_CASE("sample_texture: constant image gives that exact color everywhere valid") {
  const TexScene ts = make_tex_scene(23, false, 0.0);
  const Mesh mesh = scene_mesh(ts);
  const Vec3 color(0.3, 0.6, 0.9);
  Image constant(256, 256, color);
  const TextureExtractionResult res =
      sample_texture(constant, mesh, ts.scene.pose, ts.camera, ts.chart);
  CHECK(res.filled_mask.count() > 450);
  for (Index t = 0; t < ts.chart.texels(); ++t) {
    const int x = static_cast<int>(t % 64), y = static_cast<int>(t / 64);
    if (!res.filled_mask.at(x, y)) continue;
    REQUIRE((res.texture.at(x, y) - color).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("fill_missing: identity without holes, exact fill of a single hole") {
  ColorGrid tex(8, Vec3(0.4, 0.5, 0.6));
  CHECK((fill_missing(tex, MaskGrid(8, true)).data() - tex.data()).cwiseAbs().maxCoeff() == 0.0);

  MaskGrid one_hole(8, true);
  one_hole.set(4, 4, false);
  ColorGrid holey = tex;
  holey.set(4, 4, Vec3::Zero());
  const ColorGrid filled = fill_missing(holey, one_hole);
  CHECK((filled.at(4, 4) - Vec3(0.4, 0.5, 0.6)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fill_missing: half-plane extends a linear boundary gradient") {
  const int n = 32;
  ColorGrid tex(n);
  MaskGrid valid(n, false);
  // left half plus the top and bottom rows valid, values linear in y
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (x >= n / 2 && y != 0 && y != n - 1) continue;
      tex.set(x, y, Vec3::Constant(0.2 + 0.6 * y / (n - 1.0)));
      valid.set(x, y, true);
    }
  const ColorGrid filled = fill_missing(tex, valid, 4000, 1e-7);
  Real worst = 0;
  for (int y = 0; y < n; ++y)
    for (int x = n / 2; x < n; ++x)
      worst = std::max(worst,
                       std::abs(filled.at(x, y)[0] - (0.2 + 0.6 * y / (n - 1.0))));
  CHECK(worst < 0.05);
}

TEST_CASE("fill_missing: bounded by valid extrema (maximum principle)") {
  Rng rng(24);
  const int n = 16;
  ColorGrid tex(n);
  MaskGrid valid(n, false);
  Real lo = 1e9, hi = -1e9;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      if (rng.uniform() < 0.3) {
        const Real v = rng.uniform(0.1, 0.9);
        tex.set(x, y, Vec3::Constant(v));
        valid.set(x, y, true);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  const ColorGrid filled = fill_missing(tex, valid);
  CHECK(filled.data().minCoeff() >= lo - 1e-12);
  CHECK(filled.data().maxCoeff() <= hi + 1e-12);
}

TEST_CASE("fill_missing: zero valid texels is an error") {
  CHECK_THROWS_AS(fill_missing(ColorGrid(8), MaskGrid(8, false)), std::invalid_argument);
}

TEST_CASE("flip_blend: identity mirror map with identical inputs is the identity") {
  Rng rng(25);
  const int n = 16;
  ColorGrid tex(n);
  for (Index i = 0; i < tex.data().size(); ++i) tex.data().data()[i] = rng.uniform();
  MaskGrid valid(n, true);
  std::vector<std::int32_t> identity_map(std::size_t(n) * n);
  for (Index t = 0; t < Index(identity_map.size()); ++t)
    identity_map[std::size_t(t)] = static_cast<std::int32_t>(t);
  const FlipBlendResult res = flip_blend(tex, valid, tex, valid, identity_map);
  CHECK((res.texture.data() - tex.data()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(res.blend_mask.count() == 0);
}

TEST_CASE("flip_blend: mirror completes a half-missing symmetric texture") {
  const int n = 64;
  ColorGrid gt(n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const Real even = 0.4 + 0.3 * std::cos(0.2 * std::abs(x - 31.5)) + 0.2 * y / Real(n);
      gt.set(x, y, Vec3::Constant(even));  // symmetric about the u-center
    }
  MaskGrid valid(n, false);
  ColorGrid observed(n);
  for (int y = 0; y < n; ++y)
    for (int x = n / 2; x < n; ++x) {  // right half observed
      observed.set(x, y, gt.at(x, y));
      valid.set(x, y, true);
    }
  std::vector<std::int32_t> mirror(std::size_t(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      mirror[std::size_t(y) * n + x] = static_cast<std::int32_t>(y * n + (n - 1 - x));

  const FlipBlendResult res = flip_blend(observed, valid, observed, valid, mirror);
  const int feather = 1;  // 4 * 64 / 256
  Real worst = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      if (!res.valid.at(x, y)) continue;
      const int dist_to_seam = std::abs(2 * x - (n - 1));  // distance from the half boundary
      if (dist_to_seam <= 2 * feather + 1) continue;       // outside the feather band
      worst = std::max(worst, (res.texture.at(x, y) - gt.at(x, y)).cwiseAbs().maxCoeff());
    }
  CHECK(worst < 0.02);
  CHECK(res.blend_mask.count() > 0);
}

TEST_CASE("flip_blend: texels invalid on both sides stay invalid") {
  const int n = 8;
  ColorGrid tex(n);
  MaskGrid valid(n, false);
  valid.set(1, 1, true);
  std::vector<std::int32_t> mirror(std::size_t(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      mirror[std::size_t(y) * n + x] = static_cast<std::int32_t>(y * n + (n - 1 - x));
  const FlipBlendResult res = flip_blend(tex, valid, tex, valid, mirror);
  CHECK(!res.valid.at(4, 4));
  CHECK(res.valid.at(1, 1));
  CHECK(res.valid.at(n - 2, 1));  // mirror of the observed texel
}

TEST_CASE("pipeline masks are monotone: sample within blend within fill") {
  const TexScene ts = make_tex_scene(26, true, 30.0 * M_PI / 180.0);
  const Mesh mesh = scene_mesh(ts);
  const RenderedImage ren = render(ts.scene, ts.camera);
  const TextureExtractionResult sampled =
      sample_texture(ren.image, mesh, ts.scene.pose, ts.camera, ts.chart);
  const FlipBlendResult blended = flip_blend(sampled.texture, sampled.filled_mask,
                                             sampled.texture, sampled.filled_mask,
                                             ts.chart.mirror);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (sampled.filled_mask.at(x, y)) REQUIRE(blended.valid.at(x, y));
  CHECK(blended.valid.count() > sampled.filled_mask.count());
}

TEST_CASE("pipeline is near-identity on fully valid textures") {
  Rng rng(27);
  const int n = 32;
  ColorGrid tex(n);
  for (Index i = 0; i < tex.data().size(); ++i) tex.data().data()[i] = rng.uniform(0.2, 0.8);
  MaskGrid valid(n, true);
  std::vector<std::int32_t> mirror(std::size_t(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      mirror[std::size_t(y) * n + x] = static_cast<std::int32_t>(y * n + (n - 1 - x));
  const FlipBlendResult blended = flip_blend(tex, valid, tex, valid, mirror);
  const ColorGrid filled = fill_missing(blended.texture, blended.valid);
  CHECK((filled.data() - tex.data()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("build_gt_albedo: frontal roundtrip recovers albedo and lighting") {
  const TexScene ts = make_tex_scene(28, false, 0.0);
  const Mesh mesh = scene_mesh(ts);
  const RenderedImage ren = render(ts.scene, ts.camera);
  const GtAlbedoResult res = build_gt_albedo(ren.image, mesh, ts.scene.pose, ts.camera, ts.chart);

  CHECK((res.light.coefficients - ts.scene.light.coefficients).cwiseAbs().maxCoeff() < 0.05);

  Real err_sum = 0;
  Index count = 0;
  for (Index t = 0; t < ts.chart.texels(); ++t) {
    const int x = static_cast<int>(t % 64), y = static_cast<int>(t / 64);
    if (!res.visible.at(x, y)) continue;
    const Real u = (x + 0.5) / 64.0, v = (y + 0.5) / 64.0;
    err_sum += (res.albedo.at(x, y) - ts.scene.albedo.sample(u, v)).cwiseAbs().mean();
    ++count;
  }
  CHECK(count > 450);
  CHECK(err_sum / count < 0.03);

  const std::string report = res.report_json();
  CHECK(report.find("sampled_texels") != std::string::npos);
}

TEST_CASE("build_gt_albedo: 30-degree yaw fills the occluded side from the mirror") {
  const TexScene ts = make_tex_scene(29, true, 30.0 * M_PI / 180.0);
  const Mesh mesh = scene_mesh(ts);
  const RenderedImage ren = render(ts.scene, ts.camera);
  const GtAlbedoResult res = build_gt_albedo(ren.image, mesh, ts.scene.pose, ts.camera, ts.chart);

  // occluded-but-mirrored texels: not directly visible, mirror visible
  Real err_sum = 0;
  Index count = 0;
  for (Index t = 0; t < ts.chart.texels(); ++t) {
    const int x = static_cast<int>(t % 64), y = static_cast<int>(t / 64);
    if (ts.chart.face[std::size_t(t)] < 0) continue;
    if (res.visible.at(x, y)) continue;
    const std::int32_t m = ts.chart.mirror[std::size_t(t)];
    if (m < 0 || m == static_cast<std::int32_t>(t)) continue;
    if (!res.visible.at(static_cast<int>(m % 64), static_cast<int>(m / 64))) continue;
    if (ts.chart.rest_position(t, 2) < 0.25) continue;  // stay on the face region
    const Real u = (x + 0.5) / 64.0, v = (y + 0.5) / 64.0;
    err_sum += (res.albedo.at(x, y) - ts.scene.albedo.sample(u, v)).cwiseAbs().mean();
    ++count;
  }
  CHECK(count > 20);
  CHECK(err_sum / count < 0.05);
}

TEST_CASE("build_gt_albedo: band-0-only light divides out exactly") {
  TexScene ts = make_tex_scene(30, false, 0.0);
  ts.scene.light = SHLighting::ambient(Vec3::Constant(1.0 / kSH0));  // shading exactly 1
  const Mesh mesh = scene_mesh(ts);
  const RenderedImage ren = render(ts.scene, ts.camera);
  const GtAlbedoResult res = build_gt_albedo(ren.image, mesh, ts.scene.pose, ts.camera, ts.chart);
  Real worst = 0;
  for (Index t = 0; t < ts.chart.texels(); ++t) {
    const int x = static_cast<int>(t % 64), y = static_cast<int>(t / 64);
    if (!res.visible.at(x, y)) continue;
    const Real u = (x + 0.5) / 64.0, v = (y + 0.5) / 64.0;
    worst = std::max(worst,
                     (res.albedo.at(x, y) - ts.scene.albedo.sample(u, v)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 0.03);
}

TEST_SUITE_END();
