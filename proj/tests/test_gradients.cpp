#include "gradcheck.hpp"

#include <doctest.h>

using namespace facefit;

TEST_SUITE_BEGIN("gradients");

TEST_CASE("band-0 light gradient equals the analytic albedo mean") {
  const BlendshapeModel model = make_head_model({3, 6, 3, 606});
  const Scene scene = gradcheck::make_check_scene(model, 1);
  const Camera cam = Camera::orthographic(32, 32, 12.0);
  const RenderContext ctx = render_forward(scene, cam);

  // loss = mean of channel 0 over covered pixels; its band-0 derivative is
  // H0 times the mean sampled albedo, which finite differences confirm.
  const FragmentBuffer& fb = ctx.fragments();
  Index covered = 0;
  for (Index px = 0; px < fb.pixels(); ++px)
    if (fb.face[std::size_t(px)] >= 0) ++covered;
  MatX3 dpix = MatX3::Zero(fb.pixels(), 3);
  for (Index px = 0; px < fb.pixels(); ++px)
    if (fb.face[std::size_t(px)] >= 0) dpix(px, 0) = 1.0 / covered;
  const SceneGrads g = render_backward(ctx, dpix);

  auto mean_loss = [&](const Scene& sc) {
    const RenderContext c2 = render_forward(sc, cam);
    Real total = 0;
    for (Index px = 0; px < fb.pixels(); ++px)
      if (fb.face[std::size_t(px)] >= 0) total += c2.image().data()(px, 0);
    return total / covered;
  };
  Scene plus = scene, minus = scene;
  plus.light.coefficients(0, 0) += 1e-4;
  minus.light.coefficients(0, 0) -= 1e-4;
  const Real fd = (mean_loss(plus) - mean_loss(minus)) / 2e-4;
  CHECK(std::abs(g.dlight(0, 0) - fd) / std::abs(fd) < 1e-6);
  CHECK(g.dlight(0, 0) > 0.28209479 * 0.2);  // albedo lives in [0.2, 0.8]
  CHECK(g.dlight(0, 0) < 0.28209479 * 0.8);
}

TEST_CASE("albedo texel with no covered footprint has exactly zero gradient") {
  const BlendshapeModel model = make_head_model({3, 6, 3, 606});
  const Scene scene = gradcheck::make_check_scene(model, 2);
  const Camera cam = Camera::orthographic(32, 32, 12.0);
  const RenderContext ctx = render_forward(scene, cam);
  const MatX3 dpix = MatX3::Constant(Index(32) * 32, 3, 0.37);
  const SceneGrads g = render_backward(ctx, dpix);
  // corner texels sit outside the chart disc, nothing samples them
  const int n = scene.albedo.size();
  CHECK(g.dalbedo.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.dalbedo.row(Index(n) * n - 1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.dalbedo.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("finite differences confirm every parameter group (orthographic)") {
  const BlendshapeModel model = make_head_model({3, 6, 3, 606});
  const Camera cam = Camera::orthographic(48, 48, 18.0);
  gradcheck::CheckStats stats;
  for (std::uint64_t seed = 10; seed < 12; ++seed) {
    const Scene scene = gradcheck::make_check_scene(model, seed);
    stats.merge(gradcheck::check_all_groups(model, scene, cam, 4, seed * 31));
  }
  CHECK(stats.trials >= 56);
  CHECK(stats.failed == 0);
  CHECK(stats.worst_rel < 1e-3);
}

TEST_CASE("finite differences confirm the perspective camera path") {
  const BlendshapeModel model = make_head_model({3, 6, 3, 606});
  const Camera cam = Camera::perspective(48, 48, 72.0, 4.0);
  const Scene scene = gradcheck::make_check_scene(model, 44);
  gradcheck::CheckStats stats = gradcheck::check_all_groups(model, scene, cam, 3, 99);
  CHECK(stats.trials >= 21);
  CHECK(stats.failed == 0);
}

TEST_CASE("extra screen-space gradients flow through the landmark path") {
  const BlendshapeModel model = make_head_model({3, 6, 3, 606});
  const Scene scene = gradcheck::make_check_scene(model, 55);
  const Camera cam = Camera::orthographic(32, 32, 12.0);
  const RenderContext ctx = render_forward(scene, cam);

  // loss = x-coordinate of one projected landmark vertex
  const int lm = model.topology->landmarks[10];
  MatX2 dscreen = MatX2::Zero(model.vertex_count(), 2);
  dscreen(lm, 0) = 1.0;
  const SceneGrads g = render_backward(ctx, MatX3::Zero(Index(32) * 32, 3), &dscreen);

  auto landmark_x = [&](const Scene& sc) {
    const RenderContext c2 = render_forward(sc, cam);
    return c2.projected().screen(lm, 0);
  };
  const Real h = 1e-5;
  for (Index k = 0; k < 3; ++k) {
    Scene p = scene, m = scene;
    p.s[k] += h;
    m.s[k] -= h;
    const Real fd = (landmark_x(p) - landmark_x(m)) / (2 * h);
    REQUIRE(std::abs(g.ds[k] - fd) / std::max(std::abs(fd), 1e-8) < 1e-3);
  }
  for (Index k = 0; k < 3; ++k) {
    Scene p = scene, m = scene;
    p.pose.rotation[k] += h;
    m.pose.rotation[k] -= h;
    const Real fd = (landmark_x(p) - landmark_x(m)) / (2 * h);
    REQUIRE(std::abs(g.drotation[k] - fd) / std::max(std::abs(fd), 1e-8) < 1e-3);
  }
}

TEST_SUITE_END();
