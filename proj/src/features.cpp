#include "facefit/features.hpp"

#include "facefit/rng.hpp"

#include <cmath>

namespace facefit {

namespace {

// Area-average downsample to s x s; linear in the input pixels.
MatX3 box_downsample(const Image& image, int s) {
  MatX3 out = MatX3::Zero(Index(s) * s, 3);
  VecX weight = VecX::Zero(Index(s) * s);
  for (int y = 0; y < image.height(); ++y) {
    const int by = std::min(y * s / image.height(), s - 1);
    for (int x = 0; x < image.width(); ++x) {
      const int bx = std::min(x * s / image.width(), s - 1);
      const Index b = Index(by) * s + bx;
      out.row(b) += image.data().row(Index(y) * image.width() + x);
      weight[b] += 1.0;
    }
  }
  for (Index b = 0; b < out.rows(); ++b)
    if (weight[b] > 0) out.row(b) /= weight[b];
  return out;
}

void box_downsample_bwd(const Image& image, int s, const MatX3& dout, MatX3& dimage) {
  VecX weight = VecX::Zero(Index(s) * s);
  for (int y = 0; y < image.height(); ++y) {
    const int by = std::min(y * s / image.height(), s - 1);
    for (int x = 0; x < image.width(); ++x)
      weight[Index(by) * s + std::min(x * s / image.width(), s - 1)] += 1.0;
  }
  for (int y = 0; y < image.height(); ++y) {
    const int by = std::min(y * s / image.height(), s - 1);
    for (int x = 0; x < image.width(); ++x) {
      const int bx = std::min(x * s / image.width(), s - 1);
      const Index b = Index(by) * s + bx;
      dimage.row(Index(y) * image.width() + x) += dout.row(b) / weight[b];
    }
  }
}

}  // namespace

PatchProjectionExtractor::PatchProjectionExtractor(std::string name, std::uint64_t seed,
                                                   std::vector<int> scales, Index dim)
    : name_(std::move(name)), dim_(dim), scales_(std::move(scales)) {
  Index input_dim = 0;
  for (int s : scales_) input_dim += Index(s) * s * 3;
  projection_.resize(dim_, input_dim);
  Rng rng(seed);
  // Energy-normalized: |F(a) - F(b)|^2 approximates the mean squared pixel
  // difference of the pyramid, independent of the feature dimension, which
  // keeps feature losses on the same scale as the image losses.
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(input_dim) * static_cast<Real>(dim_));
  for (Index j = 0; j < input_dim; ++j)
    for (Index i = 0; i < dim_; ++i) projection_(i, j) = rng.normal() * scale;
}

VecX PatchProjectionExtractor::pyramid(const Image& image) const {
  Index input_dim = 0;
  for (int s : scales_) input_dim += Index(s) * s * 3;
  VecX stacked(input_dim);
  Index offset = 0;
  for (int s : scales_) {
    const MatX3 down = box_downsample(image, s);
    for (Index i = 0; i < down.rows(); ++i)
      for (int c = 0; c < 3; ++c) stacked[offset + i * 3 + c] = down(i, c);
    offset += down.rows() * 3;
  }
  return stacked;
}

VecX PatchProjectionExtractor::extract(const Image& image) const {
  return projection_ * pyramid(image);
}

MatX3 PatchProjectionExtractor::backward(const Image& image, const VecX& dfeatures) const {
  const VecX dstacked = projection_.transpose() * dfeatures;
  MatX3 dimage = MatX3::Zero(image.pixels(), 3);
  Index offset = 0;
  for (int s : scales_) {
    MatX3 dout(Index(s) * s, 3);
    for (Index i = 0; i < dout.rows(); ++i)
      for (int c = 0; c < 3; ++c) dout(i, c) = dstacked[offset + i * 3 + c];
    box_downsample_bwd(image, s, dout, dimage);
    offset += dout.rows() * 3;
  }
  return dimage;
}

std::shared_ptr<FeatureExtractor> make_identity_extractor(Index dim) {
  return std::make_shared<PatchProjectionExtractor>("patch-id", 0x1dfeedull,
                                                    std::vector<int>{32, 16, 8}, dim);
}

std::shared_ptr<FeatureExtractor> make_perceptual_extractor(Index dim) {
  return std::make_shared<PatchProjectionExtractor>("patch-perc", 0x9e7cfeedull,
                                                    std::vector<int>{48, 24}, dim);
}

}  // namespace facefit
