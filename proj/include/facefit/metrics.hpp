#pragma once

#include "facefit/features.hpp"
#include "facefit/procrustes.hpp"
#include "facefit/render.hpp"

#include <string>
#include <vector>

namespace facefit {

struct MeshErrorStats {
  Real median = 0;
  Real mean = 0;
  Real stddev = 0;

  // Reported units: 1 model unit = `unit_to_mm` millimetres.
  Real median_mm(Real unit_to_mm = 100.0) const { return median * unit_to_mm; }
  Real mean_mm(Real unit_to_mm = 100.0) const { return mean * unit_to_mm; }
  Real stddev_mm(Real unit_to_mm = 100.0) const { return stddev * unit_to_mm; }
};

// Rigidly aligns pred to gt on the 68 landmark correspondences (rotation and
// translation only), then summarizes per-vertex distances. Per-vertex
// correspondence stands in for scan-to-mesh distance, so the meshes must
// share topology.
MeshErrorStats mesh_error(const Mesh& pred, const Mesh& gt);

// Mean per-vertex distance averaged over all unordered mesh pairs.
Real diversity(const std::vector<Mesh>& meshes);

struct PoseSweepReport {
  Real same_pose = 0;
  Real yaw0 = 0;
  Real yaw15 = 0;  // +-15 degrees averaged, and so on
  Real yaw30 = 0;
  Real yaw45 = 0;
  std::string to_json() const;
};

// Renders the fitted scene at the original pose and at yaw angles
// {0, +-15, +-30, +-45} degrees, comparing extractor features against the
// source image by cosine similarity.
PoseSweepReport id_similarity_sweep(const Image& source, const Scene& scene,
                                    const Camera& camera, const FeatureExtractor& features,
                                    const RenderOptions& opts = {});

struct BenchReport {
  Real forward_render_ms = 0;
  Real gradient_step_ms = 0;
  Real shape_phase_estimate_s = 0;
  Real albedo_phase_estimate_s = 0;
  int image_size = 0;
  Index vertex_count = 0;
  std::string to_json() const;
};

// Wall-clock timings of the core pipeline at the given settings.
BenchReport benchmark_runtime(const BlendshapeModel& model, int image_size, int repetitions = 5);

// Structural check of a JSON document against a (subset of) JSON schema:
// type / properties / required / items. Returns an empty string when valid,
// a diagnostic otherwise.
std::string validate_json_schema(const std::string& document_json,
                                 const std::string& schema_json);

}  // namespace facefit
