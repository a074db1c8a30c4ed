#pragma once

#include "facefit/grids.hpp"
#include "facefit/sh.hpp"
#include "facefit/types.hpp"

#include <vector>

namespace facefit {

// Nine RGB spherical-harmonics coefficients (bands 0-2).
struct SHLighting {
  Mat93 coefficients = Mat93::Zero();

  static SHLighting ambient(const Vec3& rgb) {
    SHLighting l;
    l.coefficients.row(0) = rgb.transpose();
    return l;
  }

  Vec3 shade(const Vec9& basis) const { return coefficients.transpose() * basis; }

  // Coefficients of the scene mirrored across x = 0: basis functions odd in
  // x (Y11, Y2-2, Y21) flip sign.
  SHLighting flipped() const {
    SHLighting l = *this;
    l.coefficients.row(3) = -l.coefficients.row(3);
    l.coefficients.row(4) = -l.coefficients.row(4);
    l.coefficients.row(7) = -l.coefficients.row(7);
    return l;
  }
};

// Per-texel unit normals paired with a validity mask.
struct NormalGrid {
  int n = 0;
  MatX3 normals;  // texels() x 3, rows y*n+x
  MaskGrid valid;

  Index texels() const { return Index(n) * n; }
};

// S = sum_b L_b H_b(N) per texel, clamped below at zero unless disabled.
ColorGrid shading_from_normals(const NormalGrid& normals, const SHLighting& light,
                               bool clamp_negative = true);

struct AlbedoResult {
  ColorGrid albedo;
  MaskGrid low_confidence;  // texels where shading fell below the floor
};

// A = T / max(S, kShadingFloor), channelwise.
AlbedoResult albedo_from_texture(const ColorGrid& texture, const ColorGrid& shading);

// T = A (.) S, the exact inverse of albedo_from_texture where S exceeds the floor.
ColorGrid texture_from_albedo(const ColorGrid& albedo, const ColorGrid& shading);

struct LightEstimate {
  SHLighting light;
  Vec3 residual_rms;   // per-channel fit residual
  Real condition = 0;  // condition number of the basis system
  Vec3 gray_albedo;    // the prior albedo used per channel
};

// Least-squares SH lighting from a texture and per-texel normals under a
// gray-albedo prior (albedo assumed constant at the channel mean of T).
// Recovery is exact only up to the albedo/shading scale split; callers that
// need absolute coefficients should normalize their shading to unit mean.
LightEstimate estimate_sh_lighting(const ColorGrid& texture, const NormalGrid& normals,
                                   const MaskGrid& mask);

// Classic Phong: one directional light plus ambient.
struct PhongMaterial {
  Vec3 ambient = Vec3::Constant(0.1);
  Vec3 diffuse = Vec3::Constant(0.7);
  Vec3 specular = Vec3::Constant(0.2);
  Real shininess = 16.0;
  Vec3 light_direction = Vec3(0, 0, 1);  // unit, pointing from surface toward light
  Vec3 light_rgb = Vec3::Ones();
};

Vec3 phong_shade(const Vec3& normal, const Vec3& view_dir, const PhongMaterial& material);

}  // namespace facefit
