#include "facefit/camera.hpp"

#include <stdexcept>

namespace facefit {

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: non-positive image size");
  if (mode == Mode::kOrthographic && scale <= 0)
    throw std::invalid_argument("camera: non-positive scale");
  if (mode == Mode::kPerspective && (focal <= 0 || distance <= 0))
    throw std::invalid_argument("camera: non-positive focal length or distance");
}

ProjectedVertices project(const MatX3& vertices, const Pose& pose, const Camera& camera) {
  camera.validate();
  const Mat3 rot = axis_angle_to_matrix(pose.rotation);
  ProjectedVertices out;
  out.camera_space = (vertices * rot.transpose()).rowwise() + pose.translation.transpose();
  out.screen.resize(vertices.rows(), 2);
  out.depth.resize(vertices.rows());
  out.behind.assign(std::size_t(vertices.rows()), 0);
  for (Index i = 0; i < vertices.rows(); ++i) {
    const Vec3 v = out.camera_space.row(i).transpose();
    if (camera.mode == Camera::Mode::kOrthographic) {
      out.screen(i, 0) = camera.principal.x() + camera.scale * v.x();
      out.screen(i, 1) = camera.principal.y() - camera.scale * v.y();
      out.depth[i] = -v.z();
    } else {
      const Real dz = camera.distance - v.z();
      if (dz <= 1e-6) {
        out.behind[std::size_t(i)] = 1;
        out.screen.row(i).setZero();
        out.depth[i] = std::numeric_limits<Real>::infinity();
        continue;
      }
      out.screen(i, 0) = camera.principal.x() + camera.focal * v.x() / dz;
      out.screen(i, 1) = camera.principal.y() - camera.focal * v.y() / dz;
      out.depth[i] = dz;
    }
  }
  return out;
}

}  // namespace facefit
