#include "facefit/render.hpp"

#include <Eigen/Geometry>

#include "facefit/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace facefit {

namespace {

inline Vec2 rot90(const Vec2& v) { return Vec2(v.y(), -v.x()); }

inline Real cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Adjoint of screen-space barycentrics w(p; a, b, c) with p fixed.
void bary_bwd(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c, const Vec3& w,
              const Vec3& dw, Vec2& da, Vec2& db, Vec2& dc) {
  const Real area = cross2(b - a, c - a);
  if (area == 0.0) return;
  const Real dA = -dw.dot(w) / area;
  da += (dw[1] * rot90(p - c) + dw[2] * rot90(b - p)) / area + dA * rot90(b - c);
  db += (dw[2] * rot90(p - a) + dw[0] * rot90(c - p)) / area + dA * rot90(c - a);
  dc += (dw[0] * rot90(p - b) + dw[1] * rot90(a - p)) / area + dA * rot90(a - b);
}

void scatter_color(MatX3& grid, int n, Real u, Real v, const Vec3& dval) {
  if (n == 1) {
    grid.row(0) += dval.transpose();
    return;
  }
  const BilinearTap t = bilinear_tap(u, v, n);
  grid.row(Index(t.y0) * n + t.x0) += t.w00 * dval.transpose();
  grid.row(Index(t.y0) * n + t.x0 + 1) += t.w10 * dval.transpose();
  grid.row(Index(t.y0 + 1) * n + t.x0) += t.w01 * dval.transpose();
  grid.row(Index(t.y0 + 1) * n + t.x0 + 1) += t.w11 * dval.transpose();
}

void scatter_scalar(VecX& grid, int n, Real u, Real v, Real dval) {
  if (n == 1) {
    grid[0] += dval;
    return;
  }
  const BilinearTap t = bilinear_tap(u, v, n);
  grid[Index(t.y0) * n + t.x0] += t.w00 * dval;
  grid[Index(t.y0) * n + t.x0 + 1] += t.w10 * dval;
  grid[Index(t.y0 + 1) * n + t.x0] += t.w01 * dval;
  grid[Index(t.y0 + 1) * n + t.x0 + 1] += t.w11 * dval;
}

inline Vec3 clamp01(const Vec3& v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

}  // namespace

std::uint64_t Scene::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* data, std::size_t size) { h = fnv1a(data, size, h); };
  if (s.size()) mix(s.data(), sizeof(Real) * s.size());
  if (psi.size()) mix(psi.data(), sizeof(Real) * psi.size());
  mix(pose.rotation.data(), sizeof(Real) * 3);
  mix(pose.translation.data(), sizeof(Real) * 3);
  mix(light.coefficients.data(), sizeof(Real) * 27);
  if (albedo.texels()) mix(albedo.data().data(), sizeof(Real) * albedo.data().size());
  if (displacement.size()) mix(displacement.grid().data().data(),
                               sizeof(Real) * displacement.grid().data().size());
  if (model) mix(model->template_flat.data(), sizeof(Real) * model->template_flat.size());
  return h;
}

void RenderContext::shade_cache(PixelCache& cache, const ColorGrid& albedo) {
  const Index k = Index(cache.px.size());
  cache.shading_pre.resize(k, 3);
  cache.albedo.resize(k, 3);
  cache.color_pre.resize(k, 3);
  for (Index i = 0; i < k; ++i) {
    const Vec9 h = sh_basis(cache.normal.row(i).transpose());
    const Vec3 spre = light_.shade(h);
    const Vec3 a = albedo.sample(cache.uv(i, 0), cache.uv(i, 1));
    cache.shading_pre.row(i) = spre.transpose();
    cache.albedo.row(i) = a.transpose();
    cache.color_pre.row(i) = (a.array() * spre.cwiseMax(0.0).array()).transpose();
  }
}

void RenderContext::compose_image() {
  image_ = Image(camera_.width, camera_.height, opts_.background);
  for (Index i = 0; i < Index(covered_.px.size()); ++i) {
    const Index px = covered_.px[std::size_t(i)];
    image_.data().row(px) = clamp01(covered_.color_pre.row(i).transpose()).transpose();
  }
  for (Index i = 0; i < Index(band_.px.size()); ++i) {
    const Index px = band_.px[std::size_t(i)];
    const Real a = frags_.coverage[px];
    const Vec3 c = clamp01(band_.color_pre.row(i).transpose());
    image_.data().row(px) = (a * c + (1.0 - a) * opts_.background).transpose();
  }
}

void RenderContext::rerender_albedo(const ColorGrid& albedo) {
  if (albedo.size() != albedo_size_)
    throw std::invalid_argument("rerender_albedo: resolution changed");
  shade_cache(covered_, albedo);
  shade_cache(band_, albedo);
  if (!geometry_stripped_) albedo_grid_ = albedo;
  compose_image();
}

MatX3 RenderContext::backward_albedo(const MatX3& dpixels) const {
  MatX3 dalbedo = MatX3::Zero(Index(albedo_size_) * albedo_size_, 3);
  for (Index i = 0; i < Index(covered_.px.size()); ++i) {
    const Index px = covered_.px[std::size_t(i)];
    Vec3 dcol = dpixels.row(px).transpose();
    for (int c = 0; c < 3; ++c)
      if (covered_.color_pre(i, c) >= 1.0) dcol[c] = 0.0;
    const Vec3 d_a = dcol.cwiseProduct(covered_.shading_pre.row(i).transpose().cwiseMax(0.0));
    scatter_color(dalbedo, albedo_size_, covered_.uv(i, 0), covered_.uv(i, 1), d_a);
  }
  for (Index i = 0; i < Index(band_.px.size()); ++i) {
    const Index px = band_.px[std::size_t(i)];
    const Real alpha = frags_.coverage[px];
    Vec3 dcol = alpha * dpixels.row(px).transpose();
    for (int c = 0; c < 3; ++c)
      if (band_.color_pre(i, c) >= 1.0 || band_.color_pre(i, c) <= 0.0) dcol[c] = 0.0;
    const Vec3 d_a = dcol.cwiseProduct(band_.shading_pre.row(i).transpose().cwiseMax(0.0));
    scatter_color(dalbedo, albedo_size_, band_.uv(i, 0), band_.uv(i, 1), d_a);
  }
  return dalbedo;
}

void RenderContext::strip_to_albedo_cache() {
  geometry_stripped_ = true;
  v_coarse_.resize(0, 3);
  nf_coarse_ = {};
  disp_sample_.resize(0);
  v_detail_.resize(0, 3);
  nf_detail_ = {};
  n_cam_.resize(0, 3);
  proj_ = {};
  albedo_grid_ = ColorGrid();
}

RenderContext render_forward(const Scene& scene, const Camera& camera,
                             const RenderOptions& opts) {
  if (!scene.model) throw std::invalid_argument("render: scene has no model");
  if (scene.albedo.size() < 16) throw std::invalid_argument("render: albedo resolution below 16");
  camera.validate();

  RenderContext ctx;
  ctx.model_ = scene.model;
  ctx.camera_ = camera;
  ctx.opts_ = opts;
  ctx.pose_ = scene.pose;
  ctx.light_ = scene.light;
  ctx.albedo_size_ = scene.albedo.size();
  ctx.displacement_size_ = scene.displacement.size();

  const Topology& topo = *scene.model->topology;
  const Mesh coarse = synthesize_coarse(*scene.model, scene.s, scene.psi);
  ctx.v_coarse_ = coarse.vertices;
  ctx.nf_coarse_ = vertex_normals_fwd(ctx.v_coarse_, topo.faces);

  const Index n_verts = ctx.v_coarse_.rows();
  ctx.disp_sample_.resize(n_verts);
  ctx.v_detail_ = ctx.v_coarse_;
  if (scene.displacement.size() > 0) {
    for (Index i = 0; i < n_verts; ++i) {
      ctx.disp_sample_[i] = scene.displacement.sample(topo.uv(i, 0), topo.uv(i, 1));
      ctx.v_detail_.row(i) += ctx.disp_sample_[i] * ctx.nf_coarse_.normals.row(i);
    }
  } else {
    ctx.disp_sample_.setZero();
  }
  ctx.nf_detail_ = vertex_normals_fwd(ctx.v_detail_, topo.faces);

  ctx.rot_ = axis_angle_to_matrix(scene.pose.rotation);
  ctx.proj_ = project(ctx.v_detail_, scene.pose, camera);
  ctx.n_cam_ = ctx.nf_detail_.normals * ctx.rot_.transpose();

  RasterOptions ropts;
  ropts.sigma_px = opts.sigma_px;
  ctx.frags_ = rasterize(ctx.proj_, topo.faces, camera, ropts);

  auto fill_cache = [&](RenderContext::PixelCache& cache, bool band) {
    const auto& faces_at = band ? ctx.frags_.band_face : ctx.frags_.face;
    const MatX3& bary_at = band ? ctx.frags_.band_bary : ctx.frags_.bary;
    for (Index px = 0; px < ctx.frags_.pixels(); ++px) {
      if (faces_at[std::size_t(px)] < 0) continue;
      if (band && ctx.frags_.face[std::size_t(px)] >= 0) continue;
      cache.px.push_back(px);
    }
    const Index k = Index(cache.px.size());
    cache.uv.resize(k, 2);
    cache.normal.resize(k, 3);
    cache.normal_len.resize(k);
    for (Index i = 0; i < k; ++i) {
      const Index px = cache.px[std::size_t(i)];
      const std::int32_t f = faces_at[std::size_t(px)];
      const Vec3 w = bary_at.row(px).transpose();
      Vec2 uv = Vec2::Zero();
      Vec3 m = Vec3::Zero();
      for (int j = 0; j < 3; ++j) {
        const int v = topo.faces(f, j);
        uv += w[j] * topo.uv.row(v).transpose();
        m += w[j] * ctx.n_cam_.row(v).transpose();
      }
      const Real len = m.norm();
      cache.uv.row(i) = uv.transpose();
      cache.normal_len[i] = len;
      cache.normal.row(i) = (len > 1e-12 ? Vec3(m / len) : Vec3(0, 0, 1)).transpose();
    }
  };
  fill_cache(ctx.covered_, false);
  fill_cache(ctx.band_, true);

  ctx.albedo_grid_ = scene.albedo;
  ctx.shade_cache(ctx.covered_, scene.albedo);
  ctx.shade_cache(ctx.band_, scene.albedo);
  ctx.compose_image();
  return ctx;
}

RenderedImage render(const Scene& scene, const Camera& camera, const RenderOptions& opts) {
  RenderContext ctx = render_forward(scene, camera, opts);
  RenderedImage out;
  out.image = ctx.image();
  out.alpha = ctx.alpha();
  std::uint64_t h = scene.hash();
  h = fnv1a(&camera, sizeof(Camera), h);
  h = fnv1a(opts.background.data(), sizeof(Real) * 3, h);
  h = fnv1a(&opts.sigma_px, sizeof(Real), h);
  out.provenance = hex64(h);
  return out;
}

SceneGrads render_backward(const RenderContext& ctx, const MatX3& dpixels,
                           const MatX2* dscreen_extra) {
  if (ctx.geometry_stripped_)
    throw std::logic_error("render_backward: context was stripped to an albedo cache");
  const BlendshapeModel& model = *ctx.model_;
  const Topology& topo = *model.topology;
  const Index n_verts = ctx.v_detail_.rows();
  const bool perspective = ctx.camera_.mode == Camera::Mode::kPerspective;

  SceneGrads g;
  g.dalbedo = MatX3::Zero(Index(ctx.albedo_size_) * ctx.albedo_size_, 3);
  g.ddisplacement = VecX::Zero(std::max<Index>(Index(ctx.displacement_size_) *
                                               ctx.displacement_size_, 0));
  MatX3 dn_cam = MatX3::Zero(n_verts, 3);
  MatX3 dv_cam = MatX3::Zero(n_verts, 3);
  MatX2 dscreen = MatX2::Zero(n_verts, 2);
  VecX ddepth = VecX::Zero(n_verts);

  // Shared shading/sampling chain for one cached pixel. When `frozen_bary`
  // is set the barycentric-to-screen path is skipped (soft band pixels).
  auto pixel_chain = [&](const RenderContext::PixelCache& cache, Index i, std::int32_t f,
                         const Vec3& w, const Vec3& dcol_in, bool frozen_bary, Vec3& dw_out) {
    Vec3 dcol = dcol_in;
    for (int c = 0; c < 3; ++c)
      if (cache.color_pre(i, c) >= 1.0) dcol[c] = 0.0;
    const Vec3 a = cache.albedo.row(i).transpose();
    const Vec3 spre = cache.shading_pre.row(i).transpose();
    const Vec3 s_cl = spre.cwiseMax(0.0);
    const Vec3 d_a = dcol.cwiseProduct(s_cl);
    Vec3 d_s = dcol.cwiseProduct(a);
    for (int c = 0; c < 3; ++c)
      if (spre[c] <= 0.0) d_s[c] = 0.0;

    const Vec3 nrm = cache.normal.row(i).transpose();
    const Vec9 h = sh_basis(nrm);
    g.dlight += h * d_s.transpose();

    const Vec9 dh = ctx.light_.coefficients * d_s;
    const Vec3 dn = sh_basis_jacobian(nrm).transpose() * dh;
    Vec3 dm = Vec3::Zero();
    if (cache.normal_len[i] > 1e-12) dm = (dn - nrm * nrm.dot(dn)) / cache.normal_len[i];

    const Real u = cache.uv(i, 0), v = cache.uv(i, 1);
    scatter_color(g.dalbedo, ctx.albedo_size_, u, v, d_a);

    Vec2 duv = Vec2::Zero();
    if (!frozen_bary) {
      Vec3 ddu, ddv;
      ctx.albedo_grid_.sample_grad_uv(u, v, ddu, ddv);
      duv = Vec2(ddu.dot(d_a), ddv.dot(d_a));
    }

    dw_out.setZero();
    for (int j = 0; j < 3; ++j) {
      const int vtx = topo.faces(f, j);
      dn_cam.row(vtx) += w[j] * dm.transpose();
      dw_out[j] = ctx.n_cam_.row(vtx).dot(dm);
      if (!frozen_bary) dw_out[j] += topo.uv.row(vtx).dot(duv);
    }
  };

  // Covered pixels: full chain including barycentric screen derivatives.
  for (Index i = 0; i < Index(ctx.covered_.px.size()); ++i) {
    const Index px = ctx.covered_.px[std::size_t(i)];
    const Vec3 dcol = dpixels.row(px).transpose();
    if (dcol.isZero(0.0)) continue;
    const std::int32_t f = ctx.frags_.face[std::size_t(px)];
    const Vec3 w = ctx.frags_.bary.row(px).transpose();
    Vec3 dw;
    pixel_chain(ctx.covered_, i, f, w, dcol, false, dw);

    const int ia = topo.faces(f, 0), ib = topo.faces(f, 1), ic = topo.faces(f, 2);
    const Vec2 a = ctx.proj_.screen.row(ia).transpose();
    const Vec2 b = ctx.proj_.screen.row(ib).transpose();
    const Vec2 c = ctx.proj_.screen.row(ic).transpose();
    const int x = static_cast<int>(px % ctx.camera_.width);
    const int y = static_cast<int>(px / ctx.camera_.width);
    const Vec2 p(x + 0.5, y + 0.5);

    Vec3 dw_screen = dw;
    if (perspective) {
      // Invert the perspective correction: stored w = (ws_k / z_k) / T.
      const Real za = ctx.proj_.depth[ia], zb = ctx.proj_.depth[ib], zc = ctx.proj_.depth[ic];
      const Real area = cross2(b - a, c - a);
      Vec3 ws;
      ws[0] = cross2(b - p, c - p) / area;
      ws[1] = cross2(c - p, a - p) / area;
      ws[2] = cross2(a - p, b - p) / area;
      const Vec3 z(za, zb, zc);
      const Vec3 wp = ws.cwiseQuotient(z);
      const Real t = wp.sum();
      const Real common = dw.dot(w);
      for (int j = 0; j < 3; ++j) {
        const Real dwp = (dw[j] - common) / t;
        dw_screen[j] = dwp / z[j];
        ddepth[topo.faces(f, j)] += -wp[j] / z[j] * dwp;
      }
      Vec2 da = Vec2::Zero(), db = Vec2::Zero(), dc = Vec2::Zero();
      bary_bwd(p, a, b, c, ws, dw_screen, da, db, dc);
      dscreen.row(ia) += da.transpose();
      dscreen.row(ib) += db.transpose();
      dscreen.row(ic) += dc.transpose();
    } else {
      Vec2 da = Vec2::Zero(), db = Vec2::Zero(), dc = Vec2::Zero();
      bary_bwd(p, a, b, c, w, dw_screen, da, db, dc);
      dscreen.row(ia) += da.transpose();
      dscreen.row(ib) += db.transpose();
      dscreen.row(ic) += dc.transpose();
    }
  }

  // Soft band pixels: alpha path drives the silhouette; color path runs with
  // frozen barycentrics (the closest-point foot moves tangentially, so the
  // dropped term is second order).
  for (Index i = 0; i < Index(ctx.band_.px.size()); ++i) {
    const Index px = ctx.band_.px[std::size_t(i)];
    const Vec3 dpix = dpixels.row(px).transpose();
    if (dpix.isZero(0.0)) continue;
    const std::int32_t f = ctx.frags_.band_face[std::size_t(px)];
    const Vec3 cb = ctx.frags_.band_bary.row(px).transpose();
    const Real alpha = ctx.frags_.coverage[px];
    const Vec3 c_tri = clamp01(ctx.band_.color_pre.row(i).transpose());

    Vec3 dw_unused;
    pixel_chain(ctx.band_, i, f, cb, alpha * dpix, true, dw_unused);

    const Real dalpha = (c_tri - ctx.opts_.background).dot(dpix);
    const Real dd = alpha * (1.0 - alpha) / ctx.opts_.sigma_px * dalpha;
    const int ia = topo.faces(f, 0), ib = topo.faces(f, 1), ic = topo.faces(f, 2);
    const Vec2 a = ctx.proj_.screen.row(ia).transpose();
    const Vec2 b = ctx.proj_.screen.row(ib).transpose();
    const Vec2 cc = ctx.proj_.screen.row(ic).transpose();
    const int x = static_cast<int>(px % ctx.camera_.width);
    const int y = static_cast<int>(px / ctx.camera_.width);
    const Vec2 p(x + 0.5, y + 0.5);
    const Vec2 q = cb[0] * a + cb[1] * b + cb[2] * cc;
    const Real dist = (p - q).norm();
    if (dist > 1e-12) {
      const Vec2 dq = dd * (p - q) / dist;
      dscreen.row(ia) += (cb[0] * dq).transpose();
      dscreen.row(ib) += (cb[1] * dq).transpose();
      dscreen.row(ic) += (cb[2] * dq).transpose();
    }
  }

  if (dscreen_extra) dscreen += *dscreen_extra;

  // Screen and depth to camera space.
  for (Index i = 0; i < n_verts; ++i) {
    const Real dsx = dscreen(i, 0), dsy = dscreen(i, 1);
    if (perspective) {
      if (ctx.proj_.behind[std::size_t(i)]) continue;
      const Real wz = ctx.proj_.depth[i];  // distance - Z
      const Real X = ctx.proj_.camera_space(i, 0), Y = ctx.proj_.camera_space(i, 1);
      dv_cam(i, 0) += ctx.camera_.focal / wz * dsx;
      dv_cam(i, 1) += -ctx.camera_.focal / wz * dsy;
      dv_cam(i, 2) += ctx.camera_.focal * X / (wz * wz) * dsx -
                      ctx.camera_.focal * Y / (wz * wz) * dsy - ddepth[i];
    } else {
      dv_cam(i, 0) += ctx.camera_.scale * dsx;
      dv_cam(i, 1) += -ctx.camera_.scale * dsy;
      dv_cam(i, 2) += -ddepth[i];  // depth = -Z (unused in orthographic)
    }
  }

  // Pose: V_cam = V' R^T + t, N_cam = N' R^T.
  g.dtranslation = dv_cam.colwise().sum().transpose();
  Mat3 dR = dv_cam.transpose() * ctx.v_detail_;
  dR += dn_cam.transpose() * ctx.nf_detail_.normals;
  g.drotation = axis_angle_backward(ctx.pose_.rotation, dR);
  MatX3 dv_detail = dv_cam * ctx.rot_;
  MatX3 dn_detail = dn_cam * ctx.rot_;

  // Detail normals depend on detail vertices.
  vertex_normals_bwd(ctx.v_detail_, topo.faces, ctx.nf_detail_, dn_detail, dv_detail);

  // Displacement: v' = v_c + d(uv) * n_c.
  MatX3 dv_coarse = dv_detail;
  MatX3 dn_coarse = MatX3::Zero(n_verts, 3);
  if (ctx.displacement_size_ > 0) {
    for (Index i = 0; i < n_verts; ++i) {
      const Vec3 dvd = dv_detail.row(i).transpose();
      const Real dd = ctx.nf_coarse_.normals.row(i).dot(dvd);
      dn_coarse.row(i) += ctx.disp_sample_[i] * dvd.transpose();
      scatter_scalar(g.ddisplacement, ctx.displacement_size_, topo.uv(i, 0), topo.uv(i, 1), dd);
    }
    vertex_normals_bwd(ctx.v_coarse_, topo.faces, ctx.nf_coarse_, dn_coarse, dv_coarse);
  }

  synthesize_coarse_bwd(model, dv_coarse, g.ds, g.dpsi);
  return g;
}

RenderedImage render_phong(const Mesh& mesh, const ColorGrid& albedo, const Pose& pose,
                           const PhongMaterial& material, const Camera& camera,
                           const RenderOptions& opts) {
  camera.validate();
  const Topology& topo = *mesh.topology;
  const MatX3 normals = vertex_normals(mesh);
  const Mat3 rot = axis_angle_to_matrix(pose.rotation);
  const MatX3 n_cam = normals * rot.transpose();
  const ProjectedVertices proj = project(mesh.vertices, pose, camera);
  RasterOptions ropts;
  ropts.sigma_px = opts.sigma_px;
  const FragmentBuffer fb = rasterize(proj, topo.faces, camera, ropts);

  RenderedImage out;
  out.image = Image(camera.width, camera.height, opts.background);
  out.alpha = fb.coverage;
  for (Index px = 0; px < fb.pixels(); ++px) {
    const std::int32_t f = fb.face[std::size_t(px)];
    if (f < 0) continue;
    const Vec3 w = fb.bary.row(px).transpose();
    Vec2 uv = Vec2::Zero();
    Vec3 m = Vec3::Zero();
    Vec3 pos = Vec3::Zero();
    for (int j = 0; j < 3; ++j) {
      const int v = topo.faces(f, j);
      uv += w[j] * topo.uv.row(v).transpose();
      m += w[j] * n_cam.row(v).transpose();
      pos += w[j] * proj.camera_space.row(v).transpose();
    }
    const Vec3 nrm = m.norm() > 1e-12 ? Vec3(m.normalized()) : Vec3(0, 0, 1);
    Vec3 view(0, 0, 1);
    if (camera.mode == Camera::Mode::kPerspective)
      view = (Vec3(0, 0, camera.distance) - pos).normalized();
    const Vec3 shade = phong_shade(nrm, view, material);
    const Vec3 a = albedo.sample(uv.x(), uv.y());
    out.image.data().row(px) = clamp01(a.cwiseProduct(shade)).transpose();
  }
  std::uint64_t h = fnv1a(&material, sizeof(PhongMaterial));
  out.provenance = hex64(h);
  return out;
}

std::vector<std::uint8_t> smooth_interior_mask(const RenderContext& ctx, int border,
                                               Real plane_tolerance) {
  const FragmentBuffer& fb = ctx.fragments();
  const Topology& topo = *ctx.model_->topology;
  if (ctx.geometry_stripped_)
    throw std::logic_error("smooth_interior_mask: context was stripped");

  // Screen-space depth gradient per face.
  MatX2 face_grad = MatX2::Zero(topo.faces.rows(), 2);
  for (Index f = 0; f < topo.faces.rows(); ++f) {
    const Vec2 a = ctx.proj_.screen.row(topo.faces(f, 0)).transpose();
    const Vec2 b = ctx.proj_.screen.row(topo.faces(f, 1)).transpose();
    const Vec2 c = ctx.proj_.screen.row(topo.faces(f, 2)).transpose();
    const Real det = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
    if (std::abs(det) < 1e-12) continue;
    const Real d1 = ctx.proj_.depth[topo.faces(f, 1)] - ctx.proj_.depth[topo.faces(f, 0)];
    const Real d2 = ctx.proj_.depth[topo.faces(f, 2)] - ctx.proj_.depth[topo.faces(f, 0)];
    face_grad(f, 0) = (d1 * (c - a).y() - d2 * (b - a).y()) / det;
    face_grad(f, 1) = (d2 * (b - a).x() - d1 * (c - a).x()) / det;
  }

  // Flag silhouette pixels: uncovered, or any 4-neighbor off this pixel's
  // face plane (self-occlusion contour).
  std::vector<std::uint8_t> edge(std::size_t(fb.pixels()), 0);
  for (int y = 0; y < fb.height; ++y)
    for (int x = 0; x < fb.width; ++x) {
      const Index px = fb.idx(x, y);
      const std::int32_t f = fb.face[std::size_t(px)];
      if (f < 0) {
        edge[std::size_t(px)] = 1;
        continue;
      }
      const Real tol = plane_tolerance + 0.5 * (std::abs(face_grad(f, 0)) +
                                                std::abs(face_grad(f, 1)));
      static const int offs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (const auto& o : offs) {
        const int nx = x + o[0], ny = y + o[1];
        if (nx < 0 || nx >= fb.width || ny < 0 || ny >= fb.height) continue;
        const Index np = fb.idx(nx, ny);
        if (fb.face[std::size_t(np)] < 0) continue;  // boundary handled by coverage
        const Real predicted = fb.depth[px] + face_grad(f, 0) * o[0] + face_grad(f, 1) * o[1];
        if (std::abs(fb.depth[np] - predicted) > tol) edge[std::size_t(px)] = 1;
      }
    }

  std::vector<std::uint8_t> mask(std::size_t(fb.pixels()), 0);
  for (int y = 0; y < fb.height; ++y)
    for (int x = 0; x < fb.width; ++x) {
      const Index px = fb.idx(x, y);
      if (fb.face[std::size_t(px)] < 0) continue;
      bool ok = true;
      for (int dy = -border; dy <= border && ok; ++dy)
        for (int dx = -border; dx <= border && ok; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= fb.width || ny < 0 || ny >= fb.height ||
              edge[std::size_t(fb.idx(nx, ny))])
            ok = false;
        }
      mask[std::size_t(px)] = ok ? 1 : 0;
    }

  // Drop clamped pixels: their derivative is one-sided.
  for (Index i = 0; i < Index(ctx.covered_.px.size()); ++i) {
    const Index px = ctx.covered_.px[std::size_t(i)];
    if (!mask[std::size_t(px)]) continue;
    for (int c = 0; c < 3; ++c)
      if (ctx.covered_.color_pre(i, c) >= 1.0 || ctx.covered_.shading_pre(i, c) <= 0.0)
        mask[std::size_t(px)] = 0;
  }
  return mask;
}

MaskGrid extract_visibility(const Mesh& mesh, const Pose& pose, const Camera& camera,
                            const UVChart& chart, Real depth_tolerance) {
  const Topology& topo = *mesh.topology;
  const ProjectedVertices proj = project(mesh.vertices, pose, camera);
  RasterOptions ropts;
  ropts.sigma_px = 0.0;
  const FragmentBuffer fb = rasterize(proj, topo.faces, camera, ropts);
  const Mat3 rot = axis_angle_to_matrix(pose.rotation);

  // Posed face normals for the front-facing test, and each face's screen
  // depth slope: grazing faces change depth by a lot within one pixel, so
  // the z-test tolerance has to scale with it.
  MatX3 face_normal(topo.faces.rows(), 3);
  VecX face_slope = VecX::Zero(topo.faces.rows());
  for (Index f = 0; f < topo.faces.rows(); ++f) {
    const Vec3 a = mesh.vertices.row(topo.faces(f, 0));
    const Vec3 b = mesh.vertices.row(topo.faces(f, 1));
    const Vec3 c = mesh.vertices.row(topo.faces(f, 2));
    face_normal.row(f) = (rot * (b - a).cross(c - a)).transpose();

    const Vec2 qa = proj.screen.row(topo.faces(f, 0)).transpose();
    const Vec2 qb = proj.screen.row(topo.faces(f, 1)).transpose();
    const Vec2 qc = proj.screen.row(topo.faces(f, 2)).transpose();
    const Real det = (qb - qa).x() * (qc - qa).y() - (qb - qa).y() * (qc - qa).x();
    if (std::abs(det) > 1e-12) {
      const Real dd1 = proj.depth[topo.faces(f, 1)] - proj.depth[topo.faces(f, 0)];
      const Real dd2 = proj.depth[topo.faces(f, 2)] - proj.depth[topo.faces(f, 0)];
      const Real gx = (dd1 * (qc - qa).y() - dd2 * (qb - qa).y()) / det;
      const Real gy = (dd2 * (qb - qa).x() - dd1 * (qc - qa).x()) / det;
      face_slope[f] = std::abs(gx) + std::abs(gy);
    }
  }

  MaskGrid visible(chart.n, false);
  for (Index t = 0; t < chart.texels(); ++t) {
    const std::int32_t f = chart.face[std::size_t(t)];
    if (f < 0) continue;
    const Vec3 w = chart.bary.row(t).transpose();
    Vec3 pos = Vec3::Zero();
    for (int j = 0; j < 3; ++j)
      pos += w[j] * mesh.vertices.row(topo.faces(f, j)).transpose();
    const Vec3 cam = rot * pos + pose.translation;

    Real sx, sy, depth;
    Vec3 to_camera;
    if (camera.mode == Camera::Mode::kOrthographic) {
      sx = camera.principal.x() + camera.scale * cam.x();
      sy = camera.principal.y() - camera.scale * cam.y();
      depth = -cam.z();
      to_camera = Vec3(0, 0, 1);
    } else {
      const Real dz = camera.distance - cam.z();
      if (dz <= 1e-6) continue;
      sx = camera.principal.x() + camera.focal * cam.x() / dz;
      sy = camera.principal.y() - camera.focal * cam.y() / dz;
      depth = dz;
      to_camera = (Vec3(0, 0, camera.distance) - cam).normalized();
    }
    if (face_normal.row(f).dot(to_camera) <= 0.0) continue;  // back-facing

    const int px = static_cast<int>(std::floor(sx));
    const int py = static_cast<int>(std::floor(sy));
    if (px < 0 || px >= camera.width || py < 0 || py >= camera.height) continue;
    const Index idx = fb.idx(px, py);
    if (fb.face[std::size_t(idx)] < 0) continue;
    const Real tol = depth_tolerance + face_slope[f];
    if (depth <= fb.depth[idx] + tol)
      visible.set(static_cast<int>(t % chart.n), static_cast<int>(t / chart.n), true);
  }
  return visible;
}

}  // namespace facefit
