#pragma once

#include "facefit/mesh.hpp"
#include "facefit/types.hpp"

namespace facefit {

// Camera looking down -z; +x maps right, +y maps up (image rows grow down).
// Orthographic: pixel = principal + scale * (X, -Y).
// Perspective: the eye sits at (0, 0, distance); pixel = principal +
// focal * (X, -Y) / (distance - Z). Depth increases away from the camera.
struct Camera {
  enum class Mode { kOrthographic, kPerspective };

  Mode mode = Mode::kOrthographic;
  int width = 128;
  int height = 128;
  Real scale = 48.0;      // orthographic, pixels per model unit
  Real focal = 200.0;     // perspective, pixels
  Real distance = 4.0;    // perspective eye distance
  Vec2 principal = Vec2(64.0, 64.0);

  static Camera orthographic(int w, int h, Real scale_px) {
    Camera c;
    c.mode = Mode::kOrthographic;
    c.width = w;
    c.height = h;
    c.scale = scale_px;
    c.principal = Vec2(w / 2.0, h / 2.0);
    return c;
  }

  static Camera perspective(int w, int h, Real focal_px, Real dist) {
    Camera c;
    c.mode = Mode::kPerspective;
    c.width = w;
    c.height = h;
    c.focal = focal_px;
    c.distance = dist;
    c.principal = Vec2(w / 2.0, h / 2.0);
    return c;
  }

  void validate() const;
};

struct ProjectedVertices {
  MatX2 screen;              // continuous pixel coordinates
  VecX depth;                // increases away from the camera
  std::vector<char> behind;  // perspective only: flagged vertices
  MatX3 camera_space;        // posed vertices
};

// Rigid pose then camera projection.
ProjectedVertices project(const MatX3& vertices, const Pose& pose, const Camera& camera);
inline ProjectedVertices project(const Mesh& mesh, const Pose& pose, const Camera& camera) {
  return project(mesh.vertices, pose, camera);
}

}  // namespace facefit
