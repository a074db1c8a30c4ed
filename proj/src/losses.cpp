#include "facefit/losses.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace facefit {

void LossWeights::validate() const {
  if (sym_rec < 0 || id < 0 || perc < 0 || lmk < 0 || sc < 0 || reg < 0)
    throw std::invalid_argument("loss weights must be non-negative");
}

std::string LossReport::to_json() const {
  nlohmann::json j;
  for (const auto& [k, v] : terms) j["terms"][k] = v;
  j["total"] = total;
  j["inputs"] = inputs;
  return j.dump();
}

Real identity_loss_features(const VecX& fa, const VecX& fb, VecX* dfa) {
  const Real na = fa.norm(), nb = fb.norm();
  if (na < 1e-12 || nb < 1e-12)
    throw std::invalid_argument("identity_loss: degenerate (zero) feature vector");
  if (fa.size() == fb.size() && (fa.array() == fb.array()).all()) {
    if (dfa) dfa->setZero(fa.size());
    return 0.0;  // identical inputs cost exactly nothing
  }
  const Real dot = fa.dot(fb);
  const Real cosine = dot / (na * nb);
  if (dfa) {
    // d(1 - cos)/dfa = -(fb / (na nb) - cos * fa / na^2)
    *dfa = -(fb / (na * nb) - cosine * fa / (na * na));
  }
  return 1.0 - cosine;
}

Real identity_loss(const Image& a, const Image& b, const FeatureExtractor& f) {
  return identity_loss_features(f.extract(a), f.extract(b));
}

Real identity_loss_grad(const Image& a, const Image& b, const FeatureExtractor& f, MatX3& da) {
  const VecX fa = f.extract(a), fb = f.extract(b);
  VecX dfa;
  const Real loss = identity_loss_features(fa, fb, &dfa);
  da = f.backward(a, dfa);
  return loss;
}

Real sym_rec_loss(const Image& ren, const Image& gt, const Image& ren_flipped,
                  const Image& gt_flipped) {
  if (ren.width() != gt.width() || ren.height() != gt.height() ||
      ren_flipped.width() != gt_flipped.width() || ren_flipped.height() != gt_flipped.height())
    throw std::invalid_argument("sym_rec_loss: image size mismatch");
  return mse(gt, ren) + mse(gt_flipped, ren_flipped);
}

Real sym_rec_loss_grad(const Image& ren, const Image& gt, const Image& ren_flipped,
                       const Image& gt_flipped, MatX3& dren, MatX3& dren_flipped) {
  const Real loss = sym_rec_loss(ren, gt, ren_flipped, gt_flipped);
  dren = 2.0 * (ren.data() - gt.data()) / static_cast<Real>(ren.data().size());
  dren_flipped =
      2.0 * (ren_flipped.data() - gt_flipped.data()) / static_cast<Real>(ren_flipped.data().size());
  return loss;
}

Real perceptual_loss(const Image& a, const Image& b, const FeatureExtractor& f) {
  return (f.extract(a) - f.extract(b)).squaredNorm();
}

Real perceptual_loss_grad(const Image& a, const Image& b, const FeatureExtractor& f, MatX3& da) {
  const VecX diff = f.extract(a) - f.extract(b);
  da = f.backward(a, 2.0 * diff);
  return diff.squaredNorm();
}

Real landmark_loss(const MatX2& a, const MatX2& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("landmark_loss: count mismatch");
  return (a - b).rowwise().squaredNorm().mean();
}

Real landmark_loss_grad(const MatX2& a, const MatX2& b, MatX2& da) {
  const Real loss = landmark_loss(a, b);
  da = 2.0 * (a - b) / static_cast<Real>(a.rows());
  return loss;
}

Real shape_center_loss(const std::vector<std::vector<VecX>>& groups) {
  std::vector<VecX> means;
  for (const auto& g : groups) {
    if (g.empty()) {
      means.emplace_back();
      continue;
    }
    VecX mu = VecX::Zero(g.front().size());
    for (const auto& v : g) mu += v;
    means.push_back(mu / static_cast<Real>(g.size()));
  }
  return shape_center_loss(groups, means);
}

Real shape_center_loss(const std::vector<std::vector<VecX>>& groups,
                       const std::vector<VecX>& frozen_means,
                       std::vector<std::vector<VecX>>* grads) {
  if (groups.size() != frozen_means.size())
    throw std::invalid_argument("shape_center_loss: group/mean count mismatch");
  Real total = 0;
  if (grads) grads->assign(groups.size(), {});
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].empty()) {
      std::fprintf(stderr, "facefit: shape_center_loss skipping empty identity group %zu\n", i);
      continue;
    }
    for (const auto& v : groups[i]) {
      const VecX d = v - frozen_means[i];
      total += d.squaredNorm();
      if (grads) (*grads)[i].push_back(2.0 * d);
    }
  }
  return total;
}

Real reg_loss(const VecX& s, const VecX& psi, const ScalarGrid& displacement) {
  return s.squaredNorm() + psi.squaredNorm() + displacement.data().squaredNorm();
}

LossReport total_loss(LossStage stage, const std::map<std::string, Real>& terms,
                      const LossWeights& weights) {
  weights.validate();
  const std::vector<std::string> required =
      stage == LossStage::kAlbedo ? std::vector<std::string>{"sym_rec", "id", "perc", "lmk"}
                                  : std::vector<std::string>{"id", "perc", "lmk", "sc", "reg"};
  for (const auto& name : required)
    if (!terms.count(name))
      throw std::invalid_argument("total_loss: missing required term '" + name + "'");

  auto weight_of = [&](const std::string& name) -> Real {
    if (name == "sym_rec") return weights.sym_rec;
    if (name == "id") return weights.id;
    if (name == "perc") return weights.perc;
    if (name == "lmk") return weights.lmk;
    if (name == "sc") return weights.sc;
    if (name == "reg") return weights.reg;
    return 0.0;
  };

  LossReport report;
  report.terms = terms;
  report.inputs = Index(terms.size());
  for (const auto& name : required) report.total += weight_of(name) * terms.at(name);
  return report;
}

}  // namespace facefit
