#pragma once

#include "facefit/blendshape.hpp"
#include "facefit/camera.hpp"
#include "facefit/lighting.hpp"
#include "facefit/image.hpp"
#include "facefit/raster.hpp"
#include "facefit/uv_chart.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace facefit {

// Full parameter set describing one renderable face.
struct Scene {
  const BlendshapeModel* model = nullptr;
  VecX s;
  VecX psi;
  Pose pose;
  SHLighting light;
  ColorGrid albedo;
  DisplacementMap displacement;

  // Mirrored-world scene: albedo, pose and light flipped across x = 0.
  Scene flipped() const {
    Scene f = *this;
    f.albedo = albedo.flipped_u();
    f.pose = pose.flipped();
    f.light = light.flipped();
    return f;
  }

  std::uint64_t hash() const;
};

struct RenderOptions {
  Vec3 background = Vec3::Zero();
  Real sigma_px = 1.0;  // soft silhouette width; <= 0 for hard edges
};

struct RenderedImage {
  Image image;             // clamped to [0,1]
  VecX alpha;              // per-pixel coverage
  std::string provenance;  // hex hash of scene parameters and settings
};

struct SceneGrads {
  VecX ds, dpsi;
  Vec3 drotation = Vec3::Zero();
  Vec3 dtranslation = Vec3::Zero();
  Mat93 dlight = Mat93::Zero();
  MatX3 dalbedo;       // same layout as ColorGrid::data()
  VecX ddisplacement;  // same layout as ScalarGrid::data()
};

// Saved forward state. Covered pixels carry exact colors; uncovered pixels
// inside the soft band blend the closest triangle's color with the
// background so silhouette motion has a finite derivative.
class RenderContext {
 public:
  const Image& image() const { return image_; }
  const VecX& alpha() const { return frags_.coverage; }
  const FragmentBuffer& fragments() const { return frags_; }
  const MatX3& detail_vertices() const { return v_detail_; }
  const ProjectedVertices& projected() const { return proj_; }
  const Camera& camera() const { return camera_; }
  const std::vector<Index>& covered_pixel_list() const { return covered_.px; }
  const MatX2& covered_pixel_uv() const { return covered_.uv; }
  int albedo_resolution() const { return albedo_size_; }

  // Replaces the albedo and recomputes pixel colors with frozen geometry,
  // lighting and rasterization. Used by the albedo phase of the optimizer.
  void rerender_albedo(const ColorGrid& albedo);

  // Gradient with respect to albedo texels only (geometry frozen).
  MatX3 backward_albedo(const MatX3& dpixels) const;

  // Drops vertex-level buffers once only albedo passes are needed.
  void strip_to_albedo_cache();

 private:
  friend RenderContext render_forward(const Scene&, const Camera&, const RenderOptions&);
  friend SceneGrads render_backward(const RenderContext&, const MatX3&, const MatX2*);
  friend std::vector<std::uint8_t> smooth_interior_mask(const RenderContext&, int, Real);

  const BlendshapeModel* model_ = nullptr;
  Camera camera_;
  RenderOptions opts_;
  Pose pose_;
  SHLighting light_;
  int albedo_size_ = 0;
  int displacement_size_ = 0;
  ColorGrid albedo_grid_;  // copy for the spatial-gradient term of the backward pass

  // geometry chain
  MatX3 v_coarse_;
  NormalsForward nf_coarse_;
  VecX disp_sample_;
  MatX3 v_detail_;
  NormalsForward nf_detail_;
  Mat3 rot_;
  MatX3 n_cam_;
  ProjectedVertices proj_;
  FragmentBuffer frags_;
  bool geometry_stripped_ = false;

  // per-pixel caches, indexed by entries of covered_ / band_
  struct PixelCache {
    std::vector<Index> px;
    MatX2 uv;
    MatX3 normal;
    VecX normal_len;  // length of the pre-normalization interpolated normal
    MatX3 shading_pre;
    MatX3 albedo;
    MatX3 color_pre;
  };
  PixelCache covered_;
  PixelCache band_;

  Image image_;

  void shade_cache(PixelCache& cache, const ColorGrid& albedo);
  void compose_image();
};

// Plain rendering; identical to render_forward's image.
RenderedImage render(const Scene& scene, const Camera& camera, const RenderOptions& opts = {});

RenderContext render_forward(const Scene& scene, const Camera& camera,
                             const RenderOptions& opts = {});

// Reverse-mode accumulation through shading, sampling, barycentrics,
// projection, pose, normals, displacement and the blendshape bases.
// `dscreen_extra` lets callers add gradients that act directly on projected
// vertex positions (the landmark loss does).
SceneGrads render_backward(const RenderContext& ctx, const MatX3& dpixels,
                           const MatX2* dscreen_extra = nullptr);

// Forward-only Phong rendering used for fine-tuning experiments.
RenderedImage render_phong(const Mesh& mesh, const ColorGrid& albedo, const Pose& pose,
                           const PhongMaterial& material, const Camera& camera,
                           const RenderOptions& opts = {});

// Texel visibility: front-facing and winning the z-test at its projected pixel.
MaskGrid extract_visibility(const Mesh& mesh, const Pose& pose, const Camera& camera,
                            const UVChart& chart, Real depth_tolerance = 3e-3);

// Per-pixel mask of covered pixels at least `border` pixels away from any
// silhouette: the coverage boundary and self-occlusion contours (where a
// neighbor's depth leaves the pixel's own face plane). Pixels with clamped
// colors are excluded as well. This is the smooth region where central
// finite differences of a pixel loss are meaningful.
std::vector<std::uint8_t> smooth_interior_mask(const RenderContext& ctx, int border = 2,
                                               Real plane_tolerance = 0.01);

}  // namespace facefit
