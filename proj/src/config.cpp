#include "facefit/config.hpp"

#include "facefit/io_binary.hpp"
#include "facefit/metrics.hpp"
#include "facefit/rng.hpp"

#include <json.hpp>

#include <stdexcept>

namespace facefit {

using nlohmann::json;

Camera ExperimentConfig::make_camera() const {
  if (camera_mode == "perspective")
    return Camera::perspective(image_size, image_size, image_size * camera_focal_rel,
                               camera_distance);
  return Camera::orthographic(image_size, image_size, image_size * camera_scale_rel);
}

RenderOptions ExperimentConfig::make_render_options() const {
  RenderOptions opts;
  opts.background = background;
  opts.sigma_px = sigma_px;
  return opts;
}

namespace {

json weights_to_json(const LossWeights& w) {
  return json{{"sym_rec", w.sym_rec}, {"id", w.id},   {"perc", w.perc},
              {"lmk", w.lmk},         {"sc", w.sc},   {"reg", w.reg}};
}

LossWeights weights_from_json(const json& j, LossWeights base) {
  if (j.contains("sym_rec")) base.sym_rec = j["sym_rec"].get<Real>();
  if (j.contains("id")) base.id = j["id"].get<Real>();
  if (j.contains("perc")) base.perc = j["perc"].get<Real>();
  if (j.contains("lmk")) base.lmk = j["lmk"].get<Real>();
  if (j.contains("sc")) base.sc = j["sc"].get<Real>();
  if (j.contains("reg")) base.reg = j["reg"].get<Real>();
  return base;
}

}  // namespace

std::string ExperimentConfig::to_json() const {
  json j;
  j["model"] = {{"subdivisions", model.subdivisions},
                {"shape_dim", model.shape_dim},
                {"expr_dim", model.expr_dim},
                {"seed", model.seed}};
  j["dataset"] = {{"identities", identities},
                  {"views_per_identity", views_per_identity},
                  {"image_size", image_size},
                  {"albedo_size", albedo_size},
                  {"displacement_size", displacement_size},
                  {"yaw_range_deg", yaw_range_deg}};
  j["camera"] = {{"mode", camera_mode},
                 {"scale_rel", camera_scale_rel},
                 {"focal_rel", camera_focal_rel},
                 {"distance", camera_distance}};
  j["render"] = {{"background", {background.x(), background.y(), background.z()}},
                 {"sigma_px", sigma_px}};
  j["fit"] = {{"cycles", schedule.cycles},
              {"shape_steps", schedule.shape_steps},
              {"albedo_steps", schedule.albedo_steps},
              {"lr_shape", schedule.shape_adam.learning_rate},
              {"lr_albedo", schedule.albedo_adam.learning_rate},
              {"beta1", schedule.shape_adam.beta1},
              {"beta2", schedule.shape_adam.beta2},
              {"epsilon", schedule.shape_adam.epsilon},
              {"shape_weights", weights_to_json(schedule.shape_weights)},
              {"albedo_weights", weights_to_json(schedule.albedo_weights)},
              {"sc_mean_decay", schedule.sc_mean_decay},
              {"feature_dim", schedule.feature_dim},
              {"albedo_rank", albedo_rank},
              {"init_latent_sigma", init_latent_sigma},
              {"init_pose_deg", init_pose_deg}};
  j["eval"] = {{"unit_to_mm", unit_to_mm}};
  j["seed"] = seed;
  return j.dump(2);
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json()); }

ExperimentConfig ExperimentConfig::from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  ExperimentConfig c;
  if (j.contains("model")) {
    const auto& m = j["model"];
    if (m.contains("subdivisions")) c.model.subdivisions = m["subdivisions"].get<int>();
    if (m.contains("shape_dim")) c.model.shape_dim = m["shape_dim"].get<Index>();
    if (m.contains("expr_dim")) c.model.expr_dim = m["expr_dim"].get<Index>();
    if (m.contains("seed")) c.model.seed = m["seed"].get<std::uint64_t>();
  }
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    if (d.contains("identities")) c.identities = d["identities"].get<int>();
    if (d.contains("views_per_identity"))
      c.views_per_identity = d["views_per_identity"].get<int>();
    if (d.contains("image_size")) c.image_size = d["image_size"].get<int>();
    if (d.contains("albedo_size")) c.albedo_size = d["albedo_size"].get<int>();
    if (d.contains("displacement_size"))
      c.displacement_size = d["displacement_size"].get<int>();
    if (d.contains("yaw_range_deg")) c.yaw_range_deg = d["yaw_range_deg"].get<Real>();
  }
  if (j.contains("camera")) {
    const auto& cam = j["camera"];
    if (cam.contains("mode")) c.camera_mode = cam["mode"].get<std::string>();
    if (cam.contains("scale_rel")) c.camera_scale_rel = cam["scale_rel"].get<Real>();
    if (cam.contains("focal_rel")) c.camera_focal_rel = cam["focal_rel"].get<Real>();
    if (cam.contains("distance")) c.camera_distance = cam["distance"].get<Real>();
  }
  if (j.contains("render")) {
    const auto& r = j["render"];
    if (r.contains("background")) {
      const auto bg = r["background"].get<std::vector<Real>>();
      if (bg.size() != 3) throw std::invalid_argument("config: background needs 3 components");
      c.background = Vec3(bg[0], bg[1], bg[2]);
    }
    if (r.contains("sigma_px")) c.sigma_px = r["sigma_px"].get<Real>();
  }
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    if (f.contains("cycles")) c.schedule.cycles = f["cycles"].get<int>();
    if (f.contains("shape_steps")) c.schedule.shape_steps = f["shape_steps"].get<int>();
    if (f.contains("albedo_steps")) c.schedule.albedo_steps = f["albedo_steps"].get<int>();
    if (f.contains("lr_shape")) c.schedule.shape_adam.learning_rate = f["lr_shape"].get<Real>();
    if (f.contains("lr_albedo")) c.schedule.albedo_adam.learning_rate = f["lr_albedo"].get<Real>();
    if (f.contains("beta1"))
      c.schedule.shape_adam.beta1 = c.schedule.albedo_adam.beta1 = f["beta1"].get<Real>();
    if (f.contains("beta2"))
      c.schedule.shape_adam.beta2 = c.schedule.albedo_adam.beta2 = f["beta2"].get<Real>();
    if (f.contains("epsilon"))
      c.schedule.shape_adam.epsilon = c.schedule.albedo_adam.epsilon = f["epsilon"].get<Real>();
    if (f.contains("shape_weights"))
      c.schedule.shape_weights = weights_from_json(f["shape_weights"],
                                                   LossWeights::shape_stage_defaults());
    if (f.contains("albedo_weights"))
      c.schedule.albedo_weights = weights_from_json(f["albedo_weights"],
                                                    LossWeights::albedo_stage_defaults());
    if (f.contains("sc_mean_decay")) c.schedule.sc_mean_decay = f["sc_mean_decay"].get<Real>();
    if (f.contains("feature_dim")) c.schedule.feature_dim = f["feature_dim"].get<Index>();
    if (f.contains("albedo_rank")) c.albedo_rank = f["albedo_rank"].get<Index>();
    if (f.contains("init_latent_sigma")) c.init_latent_sigma = f["init_latent_sigma"].get<Real>();
    if (f.contains("init_pose_deg")) c.init_pose_deg = f["init_pose_deg"].get<Real>();
  }
  if (j.contains("eval") && j["eval"].contains("unit_to_mm"))
    c.unit_to_mm = j["eval"]["unit_to_mm"].get<Real>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  c.schedule.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  const std::string text = read_text_file(path);
  const std::string err = validate_json_schema(text, schema());
  if (!err.empty()) throw std::invalid_argument("config schema violation at " + err);
  return from_json(text);
}

const char* ExperimentConfig::schema() {
  return R"({
  "type": "object",
  "properties": {
    "model": {
      "type": "object",
      "properties": {
        "subdivisions": {"type": "integer"},
        "shape_dim": {"type": "integer"},
        "expr_dim": {"type": "integer"},
        "seed": {"type": "integer"}
      }
    },
    "dataset": {
      "type": "object",
      "properties": {
        "identities": {"type": "integer"},
        "views_per_identity": {"type": "integer"},
        "image_size": {"type": "integer"},
        "albedo_size": {"type": "integer"},
        "displacement_size": {"type": "integer"},
        "yaw_range_deg": {"type": "number"}
      }
    },
    "camera": {
      "type": "object",
      "properties": {
        "mode": {"type": "string"},
        "scale_rel": {"type": "number"},
        "focal_rel": {"type": "number"},
        "distance": {"type": "number"}
      }
    },
    "render": {
      "type": "object",
      "properties": {
        "background": {"type": "array", "items": {"type": "number"}},
        "sigma_px": {"type": "number"}
      }
    },
    "fit": {
      "type": "object",
      "properties": {
        "cycles": {"type": "integer"},
        "shape_steps": {"type": "integer"},
        "albedo_steps": {"type": "integer"},
        "lr_shape": {"type": "number"},
        "lr_albedo": {"type": "number"},
        "beta1": {"type": "number"},
        "beta2": {"type": "number"},
        "epsilon": {"type": "number"},
        "sc_mean_decay": {"type": "number"},
        "feature_dim": {"type": "integer"},
        "albedo_rank": {"type": "integer"},
        "init_latent_sigma": {"type": "number"},
        "init_pose_deg": {"type": "number"}
      }
    },
    "eval": {
      "type": "object",
      "properties": {"unit_to_mm": {"type": "number"}}
    },
    "seed": {"type": "integer"}
  }
})";
}

}  // namespace facefit
