#pragma once

#include "facefit/features.hpp"
#include "facefit/image.hpp"
#include "facefit/mesh.hpp"
#include "facefit/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace facefit {

struct LossWeights {
  Real sym_rec = 1.0;
  Real id = 0.5;
  Real perc = 1.0;
  Real lmk = 5.0;
  Real sc = 1.0;
  Real reg = 1e-4;

  void validate() const;

  static LossWeights shape_stage_defaults() { return {0.0, 0.5, 1.0, 5.0, 1.0, 1e-4}; }
  static LossWeights albedo_stage_defaults() { return {1.0, 1.0, 1.0, 0.5, 0.0, 0.0}; }
};

enum class LossStage { kAlbedo, kShape };

struct LossReport {
  std::map<std::string, Real> terms;
  Real total = 0;
  Index inputs = 0;
  std::string to_json() const;
};

// 1 - cos(F(a), F(b)); throws on (near-)zero feature vectors.
Real identity_loss(const Image& a, const Image& b, const FeatureExtractor& f);

// Gradient with respect to image `a` (b treated as ground truth).
Real identity_loss_grad(const Image& a, const Image& b, const FeatureExtractor& f, MatX3& da);
Real identity_loss_features(const VecX& fa, const VecX& fb, VecX* dfa = nullptr);

// MSE(I_gt, I_ren) + MSE(I_gt', I_ren') over the flipped pair.
Real sym_rec_loss(const Image& ren, const Image& gt, const Image& ren_flipped,
                  const Image& gt_flipped);
Real sym_rec_loss_grad(const Image& ren, const Image& gt, const Image& ren_flipped,
                       const Image& gt_flipped, MatX3& dren, MatX3& dren_flipped);

// Squared Euclidean distance between feature vectors.
Real perceptual_loss(const Image& a, const Image& b, const FeatureExtractor& f);
Real perceptual_loss_grad(const Image& a, const Image& b, const FeatureExtractor& f, MatX3& da);

// Mean squared distance over 68 landmark pairs in [0,1]^2 coordinates.
Real landmark_loss(const MatX2& a, const MatX2& b);
Real landmark_loss_grad(const MatX2& a, const MatX2& b, MatX2& da);

// Sum over identities of squared deviations from the group mean (two-pass
// exact means). The optimizer variant takes frozen running means instead.
Real shape_center_loss(const std::vector<std::vector<VecX>>& groups);
Real shape_center_loss(const std::vector<std::vector<VecX>>& groups,
                       const std::vector<VecX>& frozen_means,
                       std::vector<std::vector<VecX>>* grads = nullptr);

// |s|^2 + |psi|^2 + |D|_F^2.
Real reg_loss(const VecX& s, const VecX& psi, const ScalarGrid& displacement);

// Weighted sum of the stage's required terms; missing required terms are an
// error, extra terms are ignored for the total but kept in the report.
LossReport total_loss(LossStage stage, const std::map<std::string, Real>& terms,
                      const LossWeights& weights);

}  // namespace facefit
