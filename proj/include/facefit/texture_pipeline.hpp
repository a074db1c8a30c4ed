#pragma once

#include "facefit/camera.hpp"
#include "facefit/lighting.hpp"
#include "facefit/render.hpp"
#include "facefit/uv_chart.hpp"

#include <string>

namespace facefit {

struct TextureExtractionResult {
  ColorGrid texture;
  MaskGrid filled_mask;        // texels observed directly
  MaskGrid interpolated_mask;  // texels produced by diffusion fill
  MaskGrid blend_mask;         // texels taken from the mirrored pass
};

// RGB values for every visible texel, looked up in the image at the texel's
// projected position. Invisible texels are masked out.
TextureExtractionResult sample_texture(const Image& image, const Mesh& mesh, const Pose& pose,
                                       const Camera& camera, const UVChart& chart);

// Fills invalid texels by iterative neighbor diffusion until the update
// drops below 1e-4 (at most 500 sweeps). Valid texels are untouched.
ColorGrid fill_missing(const ColorGrid& texture, const MaskGrid& valid, int max_sweeps = 500,
                       Real tolerance = 1e-4);

// Takes mirrored values where the original is missing, cross-fading inside
// a feather band (width 4 texels at 256^2, scaled proportionally).
struct FlipBlendResult {
  ColorGrid texture;
  MaskGrid valid;       // original or mirror contributed
  MaskGrid blend_mask;  // texels whose value came from the mirror
};
FlipBlendResult flip_blend(const ColorGrid& texture, const MaskGrid& valid,
                           const ColorGrid& mirrored, const MaskGrid& mirrored_valid,
                           const std::vector<std::int32_t>& uv_mirror_map);

struct GtAlbedoResult {
  ColorGrid albedo;
  SHLighting light;
  Real light_residual_rms = 0;
  Real light_condition = 0;
  MaskGrid visible;
  Index sampled_texels = 0;
  Index mirrored_texels = 0;
  Index interpolated_texels = 0;
  std::string report_json() const;
};

// Full pose-invariant albedo pipeline: sample, mirror-blend occlusions,
// diffuse-fill the rest, estimate lighting, divide shading out.
GtAlbedoResult build_gt_albedo(const Image& image, const Mesh& mesh, const Pose& pose,
                               const Camera& camera, const UVChart& chart);

}  // namespace facefit
