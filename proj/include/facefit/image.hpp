#pragma once

#include "facefit/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace facefit {

// Linear-light RGB raster, rows from the top, one matrix row per pixel
// (index y*width+x). Values are kept in [0,1] by the producers that
// promise it; the container itself does not clamp.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Vec3 fill = Vec3::Zero())
      : w_(width), h_(height), data_(Index(width) * height, 3) {
    data_.rowwise() = fill.transpose();
  }
  Image(int width, int height, MatX3 data) : w_(width), h_(height), data_(std::move(data)) {}

  int width() const { return w_; }
  int height() const { return h_; }
  Index pixels() const { return Index(w_) * h_; }
  Vec3 at(int x, int y) const { return data_.row(Index(y) * w_ + x).transpose(); }
  void set(int x, int y, const Vec3& c) { data_.row(Index(y) * w_ + x) = c.transpose(); }
  MatX3& data() { return data_; }
  const MatX3& data() const { return data_; }

  // Bilinear lookup at continuous pixel coordinates (pixel centers at
  // x+0.5, y+0.5), edge-clamped.
  Vec3 sample(Real px, Real py) const {
    Real x = px - 0.5, y = py - 0.5;
    x = std::min(std::max(x, Real(0)), Real(w_ - 1));
    y = std::min(std::max(y, Real(0)), Real(h_ - 1));
    int x0 = std::min(static_cast<int>(x), w_ - 2);
    int y0 = std::min(static_cast<int>(y), h_ - 2);
    if (w_ == 1) x0 = 0;
    if (h_ == 1) y0 = 0;
    const Real tx = x - x0, ty = y - y0;
    const int x1 = std::min(x0 + 1, w_ - 1), y1 = std::min(y0 + 1, h_ - 1);
    return ((1 - tx) * (1 - ty) * at(x0, y0) + tx * (1 - ty) * at(x1, y0) +
            (1 - tx) * ty * at(x0, y1) + tx * ty * at(x1, y1));
  }

  Image flipped_horizontal() const {
    Image out(w_, h_);
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) out.set(x, y, at(w_ - 1 - x, y));
    return out;
  }

 private:
  int w_ = 0, h_ = 0;
  MatX3 data_;
};

inline Real srgb_encode(Real linear) {
  linear = std::min(std::max(linear, Real(0)), Real(1));
  return linear <= 0.0031308 ? 12.92 * linear
                             : 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

inline Real srgb_decode(Real srgb) {
  return srgb <= 0.04045 ? srgb / 12.92 : std::pow((srgb + 0.055) / 1.055, 2.4);
}

// 8-bit sRGB bytes, RGB interleaved row-major.
inline std::vector<std::uint8_t> to_srgb8(const Image& img) {
  std::vector<std::uint8_t> out(std::size_t(img.pixels()) * 3);
  for (Index i = 0; i < img.pixels(); ++i)
    for (int c = 0; c < 3; ++c)
      out[std::size_t(i) * 3 + c] =
          static_cast<std::uint8_t>(std::lround(srgb_encode(img.data()(i, c)) * 255.0));
  return out;
}

inline Image from_srgb8(const std::uint8_t* bytes, int width, int height) {
  Image img(width, height);
  for (Index i = 0; i < img.pixels(); ++i)
    for (int c = 0; c < 3; ++c)
      img.data()(i, c) = srgb_decode(bytes[std::size_t(i) * 3 + c] / 255.0);
  return img;
}

inline Real mse(const Image& a, const Image& b) {
  return (a.data() - b.data()).squaredNorm() / static_cast<Real>(a.data().size());
}

// Peak signal-to-noise ratio for [0,1] images, in dB.
inline Real psnr(const Image& a, const Image& b) {
  const Real m = mse(a, b);
  if (m <= 0) return std::numeric_limits<Real>::infinity();
  return -10.0 * std::log10(m);
}

}  // namespace facefit
