#pragma once

#include "facefit/types.hpp"

#include <cstdint>

namespace facefit {

struct AdamParams {
  Real learning_rate = 1e-4;
  Real beta1 = 0.0;
  Real beta2 = 0.99;
  Real epsilon = 1e-8;
};

// Per-parameter-group Adam state. Steps with non-finite gradients are
// rejected for the whole group and counted.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(Index size)
      : m_(VecX::Zero(size)), v_(VecX::Zero(size)) {}

  // Bias-corrected update: p -= lr * m_hat / (sqrt(v_hat) + eps).
  void step(VecX& params, const VecX& gradients, const AdamParams& hp);

  std::int64_t step_count() const { return t_; }
  std::int64_t rejected_count() const { return rejected_; }
  const VecX& first_moment() const { return m_; }
  const VecX& second_moment() const { return v_; }

  // Checkpoint plumbing.
  VecX serialize() const;
  static AdamState deserialize(const VecX& blob);

 private:
  VecX m_, v_;
  std::int64_t t_ = 0;
  std::int64_t rejected_ = 0;
};

}  // namespace facefit
