#pragma once

#include "facefit/blendshape.hpp"
#include "facefit/camera.hpp"
#include "facefit/fit.hpp"

#include <cstdint>
#include <string>

namespace facefit {

// Everything a run needs, loadable from JSON and validated against the
// published schema (schemas/config.schema.json) before any work happens.
struct ExperimentConfig {
  // model
  HeadModelParams model;
  // dataset
  int identities = 5;
  int views_per_identity = 11;
  int image_size = 64;
  int albedo_size = 128;
  int displacement_size = 32;
  Real yaw_range_deg = 45.0;
  // camera
  std::string camera_mode = "orthographic";
  Real camera_scale_rel = 0.4;  // pixels per unit = image_size * this
  Real camera_focal_rel = 1.6;
  Real camera_distance = 4.0;
  // render
  Vec3 background = Vec3::Zero();
  Real sigma_px = 1.0;
  // fit schedule
  AlternationSchedule schedule;
  Index albedo_rank = 16;
  // init perturbation
  Real init_latent_sigma = 0.3;
  Real init_pose_deg = 5.0;
  // eval
  Real unit_to_mm = 100.0;
  // run
  std::uint64_t seed = 7;

  Camera make_camera() const;
  RenderOptions make_render_options() const;
  std::string to_json() const;
  std::uint64_t hash() const;

  static ExperimentConfig from_json(const std::string& json_text);
  static ExperimentConfig load(const std::string& path);  // schema-validated
  static const char* schema();
};

}  // namespace facefit
