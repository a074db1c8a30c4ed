#pragma once

#include "facefit/mesh.hpp"

#include <string>

namespace facefit {

// Wavefront OBJ with `v`, `vt` and `f v/vt` records (vertex and texture
// indices coincide). Landmark indices travel in a sidecar JSON array at
// <path>.landmarks.json unless a path is given.
void write_obj(const std::string& path, const Mesh& mesh, const std::string& landmark_path = "");
Mesh read_obj(const std::string& path, const std::string& landmark_path = "");

}  // namespace facefit
