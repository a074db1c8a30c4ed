#pragma once

#include "facefit/types.hpp"

namespace facefit {

// Rigid (optionally uniformly scaled) transform x -> scale * R x + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Real scale = 1.0;

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
  MatX3 apply(const MatX3& pts) const {
    return (scale * (pts * rotation.transpose())).rowwise() + translation.transpose();
  }
};

// Least-squares Procrustes: finds the proper rigid transform (det R = +1)
// minimizing |apply(source) - target|^2 over corresponding rows.
// Throws SingularConfigError on collinear or degenerate configurations.
RigidTransform rigid_align(const MatX3& source, const MatX3& target, bool with_scale = false);

}  // namespace facefit
