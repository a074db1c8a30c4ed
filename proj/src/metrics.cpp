#include "facefit/metrics.hpp"

#include "facefit/noise.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace facefit {

MeshErrorStats mesh_error(const Mesh& pred, const Mesh& gt) {
  if (pred.vertex_count() != gt.vertex_count() || pred.faces().rows() != gt.faces().rows())
    throw std::invalid_argument("mesh_error: topology mismatch");
  if (pred.landmarks().size() < 3)
    throw std::invalid_argument("mesh_error: need landmark correspondences");

  const RigidTransform rt = rigid_align(pred.landmark_positions(), gt.landmark_positions());
  const MatX3 aligned = rt.apply(pred.vertices);
  VecX dist = (aligned - gt.vertices).rowwise().norm();

  MeshErrorStats stats;
  stats.mean = dist.mean();
  stats.stddev = std::sqrt((dist.array() - stats.mean).square().mean());
  std::vector<Real> sorted(dist.data(), dist.data() + dist.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  stats.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return stats;
}

Real diversity(const std::vector<Mesh>& meshes) {
  if (meshes.size() < 2) throw std::invalid_argument("diversity: need at least two meshes");
  const Index n_verts = meshes.front().vertex_count();
  for (const auto& m : meshes)
    if (m.vertex_count() != n_verts) throw std::invalid_argument("diversity: topology mismatch");
  Real total = 0;
  Index pairs = 0;
  for (std::size_t i = 0; i < meshes.size(); ++i)
    for (std::size_t j = i + 1; j < meshes.size(); ++j) {
      total += (meshes[i].vertices - meshes[j].vertices).rowwise().norm().mean();
      ++pairs;
    }
  return total / static_cast<Real>(pairs);
}

std::string PoseSweepReport::to_json() const {
  nlohmann::json j;
  j["same_pose"] = same_pose;
  j["yaw0"] = yaw0;
  j["yaw15"] = yaw15;
  j["yaw30"] = yaw30;
  j["yaw45"] = yaw45;
  return j.dump();
}

namespace {
Real cosine_similarity(const VecX& a, const VecX& b) {
  const Real na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return a.dot(b) / (na * nb);
}
}  // namespace

PoseSweepReport id_similarity_sweep(const Image& source, const Scene& scene,
                                    const Camera& camera, const FeatureExtractor& features,
                                    const RenderOptions& opts) {
  const VecX source_feat = features.extract(source);
  auto similarity_at = [&](const Pose& pose) {
    Scene posed = scene;
    posed.pose = pose;
    const RenderedImage ren = render(posed, camera, opts);
    return cosine_similarity(features.extract(ren.image), source_feat);
  };

  PoseSweepReport report;
  report.same_pose = similarity_at(scene.pose);
  auto yaw_pose = [&](Real deg) {
    return Pose(Vec3(0, deg * M_PI / 180.0, 0), Vec3::Zero());
  };
  report.yaw0 = similarity_at(yaw_pose(0));
  report.yaw15 = 0.5 * (similarity_at(yaw_pose(15)) + similarity_at(yaw_pose(-15)));
  report.yaw30 = 0.5 * (similarity_at(yaw_pose(30)) + similarity_at(yaw_pose(-30)));
  report.yaw45 = 0.5 * (similarity_at(yaw_pose(45)) + similarity_at(yaw_pose(-45)));
  return report;
}

std::string BenchReport::to_json() const {
  nlohmann::json j;
  j["forward_render_ms"] = forward_render_ms;
  j["gradient_step_ms"] = gradient_step_ms;
  j["shape_phase_estimate_s"] = shape_phase_estimate_s;
  j["albedo_phase_estimate_s"] = albedo_phase_estimate_s;
  j["image_size"] = image_size;
  j["vertex_count"] = vertex_count;
  return j.dump(2);
}

BenchReport benchmark_runtime(const BlendshapeModel& model, int image_size, int repetitions) {
  Scene scene;
  scene.model = &model;
  scene.s = VecX::Zero(model.shape_dim());
  scene.psi = VecX::Zero(model.expr_dim());
  scene.light = SHLighting::ambient(Vec3::Constant(2.0));
  scene.albedo = value_noise_colorgrid(128, Rng(17), 3, 0.2);
  scene.albedo.data().array() += 0.5;
  scene.displacement = DisplacementMap(32);
  const Camera camera = Camera::orthographic(image_size, image_size, image_size * 0.4);

  using Clock = std::chrono::steady_clock;
  auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<Real, std::milli>(Clock::now() - t0).count();
  };

  BenchReport report;
  report.image_size = image_size;
  report.vertex_count = model.vertex_count();

  // warm-up + timed forward renders
  render_forward(scene, camera);
  Real best_forward = 1e30;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = Clock::now();
    render_forward(scene, camera);
    best_forward = std::min(best_forward, ms_since(t0));
  }
  report.forward_render_ms = best_forward;

  Real best_grad = 1e30;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = Clock::now();
    RenderContext ctx = render_forward(scene, camera);
    MatX3 dpix = MatX3::Constant(ctx.image().pixels(), 3, 1.0 / ctx.image().pixels());
    render_backward(ctx, dpix);
    best_grad = std::min(best_grad, ms_since(t0));
  }
  report.gradient_step_ms = best_grad;
  report.shape_phase_estimate_s = best_grad * 300 / 1000.0;
  report.albedo_phase_estimate_s = best_forward * 300 / 1000.0;
  return report;
}

std::string validate_json_schema(const std::string& document_json,
                                 const std::string& schema_json) {
  using nlohmann::json;
  json doc, schema;
  try {
    doc = json::parse(document_json);
  } catch (const std::exception& e) {
    return std::string("document parse error: ") + e.what();
  }
  try {
    schema = json::parse(schema_json);
  } catch (const std::exception& e) {
    return std::string("schema parse error: ") + e.what();
  }

  std::function<std::string(const json&, const json&, std::string)> check =
      [&](const json& node, const json& sch, std::string path) -> std::string {
    if (sch.contains("type")) {
      const std::string type = sch["type"].get<std::string>();
      const bool ok = (type == "object" && node.is_object()) ||
                      (type == "array" && node.is_array()) ||
                      (type == "string" && node.is_string()) ||
                      (type == "number" && node.is_number()) ||
                      (type == "integer" && node.is_number_integer()) ||
                      (type == "boolean" && node.is_boolean());
      if (!ok) return path + ": expected " + type;
    }
    if (sch.contains("required"))
      for (const auto& key : sch["required"])
        if (!node.contains(key.get<std::string>()))
          return path + ": missing required key '" + key.get<std::string>() + "'";
    if (sch.contains("properties") && node.is_object())
      for (auto it = sch["properties"].begin(); it != sch["properties"].end(); ++it)
        if (node.contains(it.key())) {
          const std::string err = check(node[it.key()], it.value(), path + "/" + it.key());
          if (!err.empty()) return err;
        }
    if (sch.contains("items") && node.is_array())
      for (std::size_t i = 0; i < node.size(); ++i) {
        const std::string err =
            check(node[i], sch["items"], path + "[" + std::to_string(i) + "]");
        if (!err.empty()) return err;
      }
    return "";
  };
  return check(doc, schema, "$");
}

}  // namespace facefit
