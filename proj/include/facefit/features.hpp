#pragma once

#include "facefit/image.hpp"
#include "facefit/types.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace facefit {

// Deterministic image-to-vector map standing in for pretrained recognition
// backbones. Implementations must be pure: same image, same vector.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual const std::string& name() const = 0;
  virtual Index dim() const = 0;
  virtual VecX extract(const Image& image) const = 0;
  // Adjoint: d(loss)/d(pixels) given d(loss)/d(features).
  virtual MatX3 backward(const Image& image, const VecX& dfeatures) const = 0;
};

// Seeded random projection of a multi-scale box-downsampled pyramid. Linear
// in the pixels, so the adjoint is exact and cheap.
class PatchProjectionExtractor : public FeatureExtractor {
 public:
  PatchProjectionExtractor(std::string name, std::uint64_t seed, std::vector<int> scales,
                           Index dim = 512);

  const std::string& name() const override { return name_; }
  Index dim() const override { return dim_; }
  VecX extract(const Image& image) const override;
  MatX3 backward(const Image& image, const VecX& dfeatures) const override;

 private:
  VecX pyramid(const Image& image) const;
  std::string name_;
  Index dim_;
  std::vector<int> scales_;
  MatX projection_;  // dim x (3 * sum scales^2), built lazily per input size
};

// Default extractors used across the project.
std::shared_ptr<FeatureExtractor> make_identity_extractor(Index dim = 512);
std::shared_ptr<FeatureExtractor> make_perceptual_extractor(Index dim = 512);

}  // namespace facefit
