#pragma once

#include "facefit/types.hpp"

#include <stdexcept>

namespace facefit {

// Real spherical harmonics, bands 0-2, in the order
//   [Y00, Y1-1, Y10, Y11, Y2-2, Y2-1, Y20, Y21, Y22]
// so band 1 reads (y, z, x). Constants (Condon-Shortley-free convention):
inline constexpr Real kSH0 = 0.28209479177387814;   // 1 / (2 sqrt(pi))
inline constexpr Real kSH1 = 0.4886025119029199;    // sqrt(3 / (4 pi))
inline constexpr Real kSH2 = 1.0925484305920792;    // sqrt(15 / (4 pi))
inline constexpr Real kSH2z = 0.31539156525252005;  // sqrt(5 / (16 pi))
inline constexpr Real kSH2d = 0.5462742152960396;   // sqrt(15 / (16 pi))

// Basis values at a unit direction. No unit-length check; callers that take
// arbitrary input go through sh_basis_checked.
template <typename Derived>
Vec9 sh_basis(const Eigen::MatrixBase<Derived>& n) {
  const Real x = n[0], y = n[1], z = n[2];
  Vec9 h;
  h[0] = kSH0;
  h[1] = kSH1 * y;
  h[2] = kSH1 * z;
  h[3] = kSH1 * x;
  h[4] = kSH2 * x * y;
  h[5] = kSH2 * y * z;
  h[6] = kSH2z * (3.0 * z * z - 1.0);
  h[7] = kSH2 * x * z;
  h[8] = kSH2d * (x * x - y * y);
  return h;
}

template <typename Derived>
Vec9 sh_basis_checked(const Eigen::MatrixBase<Derived>& n) {
  if (std::abs(n.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("sh_basis: direction is not unit length");
  return sh_basis(n);
}

// Jacobian d(basis)/d(direction), rows matching sh_basis order.
template <typename Derived>
Mat93 sh_basis_jacobian(const Eigen::MatrixBase<Derived>& n) {
  const Real x = n[0], y = n[1], z = n[2];
  Mat93 j = Mat93::Zero();
  j(1, 1) = kSH1;
  j(2, 2) = kSH1;
  j(3, 0) = kSH1;
  j(4, 0) = kSH2 * y;
  j(4, 1) = kSH2 * x;
  j(5, 1) = kSH2 * z;
  j(5, 2) = kSH2 * y;
  j(6, 2) = 6.0 * kSH2z * z;
  j(7, 0) = kSH2 * z;
  j(7, 2) = kSH2 * x;
  j(8, 0) = 2.0 * kSH2d * x;
  j(8, 1) = -2.0 * kSH2d * y;
  return j;
}

}  // namespace facefit
