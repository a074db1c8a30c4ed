#pragma once

#include "facefit/types.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace facefit {

// Weights of an edge-clamped bilinear tap at continuous uv in [0,1]^2.
// Texel (i,j) is centered at ((i+0.5)/n, (j+0.5)/n).
struct BilinearTap {
  int x0, y0;        // lower texel corner, x0 in [0, n-2] unless n == 1
  Real tx, ty;       // fractional weights
  Real w00, w10, w01, w11;
  Real dx_du, dy_dv; // scale of texel coords per uv unit (0 where clamped)
};

inline BilinearTap bilinear_tap(Real u, Real v, int n) {
  BilinearTap t;
  Real x = u * n - 0.5;
  Real y = v * n - 0.5;
  t.dx_du = static_cast<Real>(n);
  t.dy_dv = static_cast<Real>(n);
  if (x <= 0.0) { x = 0.0; t.dx_du = 0.0; }
  if (x >= n - 1.0) { x = n - 1.0; t.dx_du = 0.0; }
  if (y <= 0.0) { y = 0.0; t.dy_dv = 0.0; }
  if (y >= n - 1.0) { y = n - 1.0; t.dy_dv = 0.0; }
  t.x0 = std::min(static_cast<int>(x), n - 2);
  t.y0 = std::min(static_cast<int>(y), n - 2);
  if (n == 1) { t.x0 = 0; t.y0 = 0; }
  t.tx = x - t.x0;
  t.ty = y - t.y0;
  t.w00 = (1 - t.tx) * (1 - t.ty);
  t.w10 = t.tx * (1 - t.ty);
  t.w01 = (1 - t.tx) * t.ty;
  t.w11 = t.tx * t.ty;
  return t;
}

// Square scalar field over [0,1]^2 with edge-clamped bilinear sampling.
class ScalarGrid {
 public:
  ScalarGrid() = default;
  explicit ScalarGrid(int n, Real fill = 0.0) : n_(n), data_(VecX::Constant(Index(n) * n, fill)) {}
  ScalarGrid(int n, VecX data) : n_(n), data_(std::move(data)) {}

  int size() const { return n_; }
  Index texels() const { return Index(n_) * n_; }
  Real& at(int x, int y) { return data_[Index(y) * n_ + x]; }
  Real at(int x, int y) const { return data_[Index(y) * n_ + x]; }
  VecX& data() { return data_; }
  const VecX& data() const { return data_; }

  Real sample(Real u, Real v) const {
    if (n_ == 1) return data_[0];
    const BilinearTap t = bilinear_tap(u, v, n_);
    return t.w00 * at(t.x0, t.y0) + t.w10 * at(t.x0 + 1, t.y0) +
           t.w01 * at(t.x0, t.y0 + 1) + t.w11 * at(t.x0 + 1, t.y0 + 1);
  }

  // d(sample)/d(u,v) at the same location (zero in clamped directions).
  Vec2 sample_grad_uv(Real u, Real v) const {
    if (n_ == 1) return Vec2::Zero();
    const BilinearTap t = bilinear_tap(u, v, n_);
    const Real g00 = at(t.x0, t.y0), g10 = at(t.x0 + 1, t.y0);
    const Real g01 = at(t.x0, t.y0 + 1), g11 = at(t.x0 + 1, t.y0 + 1);
    Real dx = (g10 - g00) * (1 - t.ty) + (g11 - g01) * t.ty;
    Real dy = (g01 - g00) * (1 - t.tx) + (g11 - g10) * t.tx;
    return Vec2(dx * t.dx_du, dy * t.dy_dv);
  }

  // Adjoint of sample(): scatter dval into the four tapped texels.
  void scatter_add(Real u, Real v, Real dval) {
    if (n_ == 1) { data_[0] += dval; return; }
    const BilinearTap t = bilinear_tap(u, v, n_);
    at(t.x0, t.y0) += t.w00 * dval;
    at(t.x0 + 1, t.y0) += t.w10 * dval;
    at(t.x0, t.y0 + 1) += t.w01 * dval;
    at(t.x0 + 1, t.y0 + 1) += t.w11 * dval;
  }

  void clamp(Real lo, Real hi) { data_ = data_.cwiseMax(lo).cwiseMin(hi); }

 private:
  int n_ = 0;
  VecX data_;
};

// Square RGB field over [0,1]^2; rows indexed y*n+x, one column per channel.
class ColorGrid {
 public:
  ColorGrid() = default;
  explicit ColorGrid(int n, Vec3 fill = Vec3::Zero()) : n_(n), data_(Index(n) * n, 3) {
    data_.rowwise() = fill.transpose();
  }
  ColorGrid(int n, MatX3 data) : n_(n), data_(std::move(data)) {}

  int size() const { return n_; }
  Index texels() const { return Index(n_) * n_; }
  Vec3 at(int x, int y) const { return data_.row(Index(y) * n_ + x).transpose(); }
  void set(int x, int y, const Vec3& c) { data_.row(Index(y) * n_ + x) = c.transpose(); }
  MatX3& data() { return data_; }
  const MatX3& data() const { return data_; }

  Vec3 sample(Real u, Real v) const {
    if (n_ == 1) return data_.row(0).transpose();
    const BilinearTap t = bilinear_tap(u, v, n_);
    return (t.w00 * data_.row(row(t.x0, t.y0)) + t.w10 * data_.row(row(t.x0 + 1, t.y0)) +
            t.w01 * data_.row(row(t.x0, t.y0 + 1)) + t.w11 * data_.row(row(t.x0 + 1, t.y0 + 1)))
        .transpose();
  }

  // Returns d(sample)/du and d(sample)/dv as two RGB vectors.
  void sample_grad_uv(Real u, Real v, Vec3& ddu, Vec3& ddv) const {
    if (n_ == 1) { ddu.setZero(); ddv.setZero(); return; }
    const BilinearTap t = bilinear_tap(u, v, n_);
    const Vec3 g00 = at(t.x0, t.y0), g10 = at(t.x0 + 1, t.y0);
    const Vec3 g01 = at(t.x0, t.y0 + 1), g11 = at(t.x0 + 1, t.y0 + 1);
    ddu = ((g10 - g00) * (1 - t.ty) + (g11 - g01) * t.ty) * t.dx_du;
    ddv = ((g01 - g00) * (1 - t.tx) + (g11 - g10) * t.tx) * t.dy_dv;
  }

  void scatter_add(Real u, Real v, const Vec3& dval) {
    if (n_ == 1) { data_.row(0) += dval.transpose(); return; }
    const BilinearTap t = bilinear_tap(u, v, n_);
    data_.row(row(t.x0, t.y0)) += t.w00 * dval.transpose();
    data_.row(row(t.x0 + 1, t.y0)) += t.w10 * dval.transpose();
    data_.row(row(t.x0, t.y0 + 1)) += t.w01 * dval.transpose();
    data_.row(row(t.x0 + 1, t.y0 + 1)) += t.w11 * dval.transpose();
  }

  // Horizontal mirror (u -> 1-u); exact texel involution.
  ColorGrid flipped_u() const {
    ColorGrid out(n_);
    for (int y = 0; y < n_; ++y)
      for (int x = 0; x < n_; ++x) out.set(x, y, at(n_ - 1 - x, y));
    return out;
  }

  void clamp(Real lo, Real hi) { data_ = data_.cwiseMax(lo).cwiseMin(hi); }

 private:
  Index row(int x, int y) const { return Index(y) * n_ + x; }
  int n_ = 0;
  MatX3 data_;
};

// Per-texel boolean mask paired with a grid of the same resolution.
class MaskGrid {
 public:
  MaskGrid() = default;
  explicit MaskGrid(int n, bool fill = false) : n_(n), data_(Index(n) * n, fill ? 1 : 0) {}

  int size() const { return n_; }
  bool at(int x, int y) const { return data_[std::size_t(y) * n_ + x] != 0; }
  void set(int x, int y, bool v) { data_[std::size_t(y) * n_ + x] = v ? 1 : 0; }
  Index count() const {
    Index c = 0;
    for (auto v : data_) c += v;
    return c;
  }
  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

 private:
  int n_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace facefit
