#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace facefit {

using Real = double;
using Index = Eigen::Index;

using Vec2 = Eigen::Matrix<Real, 2, 1>;
using Vec3 = Eigen::Matrix<Real, 3, 1>;
using Vec4 = Eigen::Matrix<Real, 4, 1>;
using Vec9 = Eigen::Matrix<Real, 9, 1>;
using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using Mat3 = Eigen::Matrix<Real, 3, 3>;
using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using MatX2 = Eigen::Matrix<Real, Eigen::Dynamic, 2>;
using MatX3 = Eigen::Matrix<Real, Eigen::Dynamic, 3>;
using Mat93 = Eigen::Matrix<Real, 9, 3>;

using FaceMat = Eigen::Matrix<int, Eigen::Dynamic, 3>;

// Displacement maps are clamped to this range (model units).
inline constexpr Real kDisplacementLimit = 0.01;

// Shading floor used when dividing texture by shading.
inline constexpr Real kShadingFloor = 0.01;

struct SingularConfigError : std::runtime_error {
  explicit SingularConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IllConditionedError : std::runtime_error {
  IllConditionedError(const std::string& what, Real cond)
      : std::runtime_error(what + " (condition number " + std::to_string(cond) + ")"),
        condition(cond) {}
  Real condition;
};

}  // namespace facefit
