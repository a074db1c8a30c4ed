#include "facefit/procrustes.hpp"

#include <Eigen/LU>

#include <Eigen/SVD>

#include <stdexcept>

namespace facefit {

RigidTransform rigid_align(const MatX3& source, const MatX3& target, bool with_scale) {
  if (source.rows() != target.rows())
    throw std::invalid_argument("rigid_align: point counts differ");
  if (source.rows() < 3)
    throw std::invalid_argument("rigid_align: need at least 3 correspondences");

  const Vec3 mu_s = source.colwise().mean();
  const Vec3 mu_t = target.colwise().mean();
  const MatX3 cs = source.rowwise() - mu_s.transpose();
  const MatX3 ct = target.rowwise() - mu_t.transpose();

  const Mat3 cov = ct.transpose() * cs;
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();

  // A collinear (or coincident) point set drives the two smallest singular
  // values of the cross-covariance to zero and leaves the rotation free.
  if (sv[0] < 1e-15 || sv[1] / sv[0] < 1e-9)
    throw SingularConfigError("rigid_align: degenerate (collinear or coincident) configuration");

  if ((source.array() == target.array()).all()) {
    return RigidTransform{};  // exact optimum for identical sets
  }

  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  RigidTransform rt;
  rt.rotation = svd.matrixU() * d * svd.matrixV().transpose();

  if (with_scale) {
    const Real var_s = cs.squaredNorm();
    if (var_s < 1e-30) throw SingularConfigError("rigid_align: zero-variance source");
    rt.scale = (sv[0] + sv[1] + d(2, 2) * sv[2]) / var_s;
  }
  rt.translation = mu_t - rt.scale * (rt.rotation * mu_s);
  return rt;
}

}  // namespace facefit
