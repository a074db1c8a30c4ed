#include "facefit/lighting.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace facefit {

ColorGrid shading_from_normals(const NormalGrid& normals, const SHLighting& light,
                               bool clamp_negative) {
  ColorGrid out(normals.n);
  for (Index i = 0; i < normals.texels(); ++i) {
    Vec3 s = light.shade(sh_basis(normals.normals.row(i).transpose()));
    if (clamp_negative) s = s.cwiseMax(0.0);
    out.data().row(i) = s.transpose();
  }
  return out;
}

AlbedoResult albedo_from_texture(const ColorGrid& texture, const ColorGrid& shading) {
  if (texture.size() != shading.size())
    throw std::invalid_argument("albedo_from_texture: resolution mismatch");
  AlbedoResult res;
  res.albedo = ColorGrid(texture.size());
  res.low_confidence = MaskGrid(texture.size(), false);
  const int n = texture.size();
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const Vec3 t = texture.at(x, y);
      const Vec3 s = shading.at(x, y);
      Vec3 a;
      bool low = false;
      for (int c = 0; c < 3; ++c) {
        if (s[c] < kShadingFloor) low = true;
        a[c] = t[c] / std::max(s[c], kShadingFloor);
      }
      res.albedo.set(x, y, a);
      res.low_confidence.set(x, y, low);
    }
  return res;
}

ColorGrid texture_from_albedo(const ColorGrid& albedo, const ColorGrid& shading) {
  if (albedo.size() != shading.size())
    throw std::invalid_argument("texture_from_albedo: resolution mismatch");
  ColorGrid out(albedo.size());
  out.data() = albedo.data().cwiseProduct(shading.data());
  return out;
}

LightEstimate estimate_sh_lighting(const ColorGrid& texture, const NormalGrid& normals,
                                   const MaskGrid& mask) {
  if (texture.size() != normals.n || mask.size() != normals.n)
    throw std::invalid_argument("estimate_sh_lighting: resolution mismatch");
  std::vector<Index> rows;
  for (Index i = 0; i < normals.texels(); ++i) {
    const int x = static_cast<int>(i % normals.n), y = static_cast<int>(i / normals.n);
    if (mask.at(x, y)) rows.push_back(i);
  }
  if (rows.size() < 9)
    throw std::invalid_argument("estimate_sh_lighting: fewer than 9 valid texels");

  MatX h(Index(rows.size()), 9);
  MatX3 t(Index(rows.size()), 3);
  for (Index k = 0; k < h.rows(); ++k) {
    h.row(k) = sh_basis(normals.normals.row(rows[std::size_t(k)]).transpose()).transpose();
    t.row(k) = texture.data().row(rows[std::size_t(k)]);
  }

  Eigen::JacobiSVD<MatX> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX sv = svd.singularValues();
  const Real cond = sv[0] / std::max(sv[sv.size() - 1], Real(1e-300));
  if (sv[sv.size() - 1] < 1e-12 || cond > 1e8)
    throw IllConditionedError("estimate_sh_lighting: normals span a rank-deficient basis", cond);

  LightEstimate est;
  est.condition = cond;
  est.gray_albedo = t.colwise().mean();
  for (int c = 0; c < 3; ++c) {
    const Real a = std::max(est.gray_albedo[c], Real(1e-6));
    const VecX l = svd.solve(t.col(c)) / a;
    est.light.coefficients.col(c) = l;
    est.residual_rms[c] = std::sqrt((h * (a * l) - t.col(c)).squaredNorm() / Real(h.rows()));
  }
  // Physical mean light cannot be negative.
  est.light.coefficients.row(0) = est.light.coefficients.row(0).cwiseMax(0.0);
  return est;
}

Vec3 phong_shade(const Vec3& normal, const Vec3& view_dir, const PhongMaterial& material) {
  const Real ndotl = std::max(normal.dot(material.light_direction), Real(0));
  // Reflection of the light direction about the normal.
  const Vec3 r = 2.0 * normal.dot(material.light_direction) * normal - material.light_direction;
  const Real rdotv = std::max(r.dot(view_dir), Real(0));
  const Real spec = ndotl > 0 ? std::pow(rdotv, material.shininess) : 0.0;
  Vec3 out = material.ambient;
  out += (material.diffuse.array() * material.light_rgb.array()).matrix() * ndotl;
  out += (material.specular.array() * material.light_rgb.array()).matrix() * spec;
  return out;
}

}  // namespace facefit
