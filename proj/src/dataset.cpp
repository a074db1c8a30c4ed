#include "facefit/dataset.hpp"

#include "facefit/io_binary.hpp"
#include "facefit/noise.hpp"
#include "facefit/png_io.hpp"
#include "facefit/rng.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace facefit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Quantize through float32 so on-disk sidecars reproduce renders bit-exactly.
void quantize_f32(ColorGrid& grid) {
  for (Index i = 0; i < grid.data().size(); ++i)
    grid.data().data()[i] = static_cast<float>(grid.data().data()[i]);
}

ColorGrid gen_gt_albedo(int n, Rng rng) {
  const Vec3 gray = Vec3::Constant(0.5);
  ColorGrid albedo(n, gray);
  for (int k = 0; k < 6; ++k) {
    const ColorGrid comp = value_noise_colorgrid(n, rng.stream("lowrank", std::uint64_t(k)), 2,
                                                 0.25);
    albedo.data() += rng.normal(0.0, 0.6) * comp.data();
  }
  const ColorGrid detail = value_noise_colorgrid(n, rng.stream("detail"), 5, 0.08);
  albedo.data() += detail.data();
  albedo.clamp(0.05, 0.95);
  quantize_f32(albedo);
  return albedo;
}

SHLighting gen_light(Rng rng, const MatX3& front_normals) {
  SHLighting light;
  const Real base = rng.uniform(1.6, 2.2);
  light.coefficients.row(0) = Vec3::Constant(base).transpose();
  for (int b = 1; b < 9; ++b)
    for (int c = 0; c < 3; ++c) light.coefficients(b, c) = rng.normal(0.0, 0.12);
  // Rescale for a well-exposed render: mean front shading ~ 0.85.
  Real mean = 0;
  for (Index i = 0; i < front_normals.rows(); ++i)
    mean += light.shade(sh_basis(front_normals.row(i).transpose())).mean();
  mean /= static_cast<Real>(front_normals.rows());
  light.coefficients *= 0.85 / std::max(mean, 1e-6);
  // Keep coefficients exactly representable across JSON round-trips.
  return light;
}

MatX2 gt_landmarks(const Mesh& mesh, const Pose& pose, const Camera& camera) {
  const ProjectedVertices proj = project(mesh, pose, camera);
  MatX2 out(Index(mesh.landmarks().size()), 2);
  for (Index i = 0; i < out.rows(); ++i) {
    out(i, 0) = proj.screen(mesh.landmarks()[std::size_t(i)], 0) / camera.width;
    out(i, 1) = proj.screen(mesh.landmarks()[std::size_t(i)], 1) / camera.height;
  }
  return out;
}

json light_to_json(const SHLighting& l) {
  json out = json::array();
  for (int b = 0; b < 9; ++b)
    out.push_back(json::array({l.coefficients(b, 0), l.coefficients(b, 1),
                               l.coefficients(b, 2)}));
  return out;
}

SHLighting light_from_json(const json& j) {
  SHLighting l;
  for (int b = 0; b < 9; ++b)
    for (int c = 0; c < 3; ++c) l.coefficients(b, c) = j[b][c].get<Real>();
  return l;
}

json vec_to_json(const VecX& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

VecX vec_from_json(const json& j) {
  VecX v(Index(j.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = j[i].get<Real>();
  return v;
}

std::string identity_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", i);
  return buf;
}

}  // namespace

GeneratedDataset gen_dataset(const ExperimentConfig& config) {
  GeneratedDataset out;
  out.model = std::make_shared<BlendshapeModel>(make_head_model(config.model));
  out.camera = config.make_camera();
  out.render_opts = config.make_render_options();

  const Rng root(config.seed);
  const Mesh template_mesh = out.model->template_mesh();
  const MatX3 tmpl_normals = vertex_normals(template_mesh);
  // Front-facing template normals for light exposure normalization.
  std::vector<Index> front;
  for (Index i = 0; i < tmpl_normals.rows(); ++i)
    if (tmpl_normals(i, 2) > 0.2) front.push_back(i);
  MatX3 front_normals(Index(front.size()), 3);
  for (Index i = 0; i < front_normals.rows(); ++i) front_normals.row(i) = tmpl_normals.row(front[std::size_t(i)]);

  for (int i = 0; i < config.identities; ++i) {
    const Rng id_rng = root.stream("identity", std::uint64_t(i));
    GeneratedIdentity identity;
    identity.id = identity_name(i);
    identity.s = VecX::Zero(out.model->shape_dim());
    for (Index k = 0; k < identity.s.size(); ++k)
      identity.s[k] = id_rng.stream("s", std::uint64_t(k)).normal(0.0, 0.3);
    identity.albedo = gen_gt_albedo(config.albedo_size, id_rng.stream("albedo"));
    identity.displacement = DisplacementMap(config.displacement_size);

    std::vector<Image> images;
    for (int k = 0; k < config.views_per_identity; ++k) {
      const Rng view_rng = id_rng.stream("view", std::uint64_t(k));
      GeneratedView view;
      view.psi = VecX::Zero(out.model->expr_dim());
      Real yaw = 0, pitch = 0, roll = 0;
      if (k > 0) {
        for (Index e = 0; e < view.psi.size(); ++e)
          view.psi[e] = view_rng.stream("psi", std::uint64_t(e)).normal(0.0, 0.2);
        const int spread = config.views_per_identity - 1;
        yaw = (-config.yaw_range_deg +
               2.0 * config.yaw_range_deg * (k - 1) / std::max(spread - 1, 1)) *
              M_PI / 180.0;
        pitch = view_rng.stream("pitch").normal(0.0, 0.05);
        roll = view_rng.stream("roll").normal(0.0, 0.03);
      }
      const Mat3 r_yaw = axis_angle_to_matrix(Vec3(0, yaw, 0));
      const Mat3 r_pitch = axis_angle_to_matrix(Vec3(pitch, 0, 0));
      const Mat3 r_roll = axis_angle_to_matrix(Vec3(0, 0, roll));
      const Mat3 r = r_roll * r_pitch * r_yaw;
      const Eigen::AngleAxis<Real> aa(r);
      Vec3 t = Vec3::Zero();
      t.x() = view_rng.stream("tx").normal(0.0, 0.02);
      t.y() = view_rng.stream("ty").normal(0.0, 0.02);
      view.pose = Pose(aa.angle() * aa.axis(), t);
      view.light = gen_light(view_rng.stream("light"), front_normals);

      Scene scene;
      scene.model = out.model.get();
      scene.s = identity.s;
      scene.psi = view.psi;
      scene.pose = view.pose;
      scene.light = view.light;
      scene.albedo = identity.albedo;
      scene.displacement = identity.displacement;

      const Mesh detailed = apply_displacement(
          synthesize_coarse(*out.model, identity.s, view.psi), identity.displacement);
      view.landmarks = gt_landmarks(detailed, view.pose, out.camera);

      images.push_back(render(scene, out.camera, out.render_opts).image);
      identity.views.push_back(std::move(view));
    }
    out.identities.push_back(std::move(identity));
    out.images.push_back(std::move(images));
  }
  return out;
}

void write_dataset(const GeneratedDataset& dataset, const ExperimentConfig& config,
                   const std::string& dir) {
  const std::string config_hash = hex64(config.hash());
  fs::create_directories(dir);

  json manifest;
  manifest["config_hash"] = config_hash;
  manifest["seed"] = config.seed;
  manifest["identities"] = json::array();

  for (std::size_t i = 0; i < dataset.identities.size(); ++i) {
    const GeneratedIdentity& identity = dataset.identities[i];
    const std::string id_dir = dir + "/" + identity.id;
    fs::create_directories(id_dir);

    json gt;
    gt["id"] = identity.id;
    gt["config_hash"] = config_hash;
    gt["seed"] = config.seed;
    gt["s"] = vec_to_json(identity.s);
    gt["albedo_file"] = "albedo.f32";
    gt["displacement_file"] = "displacement.dmap";
    gt["views"] = json::array();
    for (std::size_t k = 0; k < identity.views.size(); ++k) {
      const GeneratedView& view = identity.views[k];
      json vj;
      vj["psi"] = vec_to_json(view.psi);
      vj["rotation"] = vec_to_json(view.pose.rotation);
      vj["translation"] = vec_to_json(view.pose.translation);
      vj["light"] = light_to_json(view.light);
      json lmk = json::array();
      for (Index l = 0; l < view.landmarks.rows(); ++l)
        lmk.push_back(json::array({view.landmarks(l, 0), view.landmarks(l, 1)}));
      vj["landmarks"] = lmk;
      vj["image"] = "view_" + std::to_string(k) + ".png";
      gt["views"].push_back(vj);
      write_image_png(id_dir + "/view_" + std::to_string(k) + ".png", dataset.images[i][k]);
    }
    write_float_grid(id_dir + "/albedo.f32", identity.albedo);
    write_colorgrid_png(id_dir + "/albedo.png", identity.albedo);
    write_dmap(id_dir + "/displacement.dmap", identity.displacement);
    write_text_file(id_dir + "/gt.json", gt.dump(2) + "\n");
    manifest["identities"].push_back(identity.id);
  }
  manifest["camera"] = {{"width", dataset.camera.width}, {"height", dataset.camera.height}};
  write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

GeneratedDataset load_dataset(const std::string& dir, const ExperimentConfig& config) {
  GeneratedDataset out;
  out.model = std::make_shared<BlendshapeModel>(make_head_model(config.model));
  out.camera = config.make_camera();
  out.render_opts = config.make_render_options();

  const json manifest = json::parse(read_text_file(dir + "/manifest.json"));
  for (const auto& id_name : manifest["identities"]) {
    const std::string id_dir = dir + "/" + id_name.get<std::string>();
    const json gt = json::parse(read_text_file(id_dir + "/gt.json"));
    GeneratedIdentity identity;
    identity.id = gt["id"].get<std::string>();
    identity.s = vec_from_json(gt["s"]);
    identity.albedo = read_float_grid(id_dir + "/" + gt["albedo_file"].get<std::string>());
    identity.displacement =
        read_dmap(id_dir + "/" + gt["displacement_file"].get<std::string>());
    std::vector<Image> images;
    for (const auto& vj : gt["views"]) {
      GeneratedView view;
      view.psi = vec_from_json(vj["psi"]);
      view.pose = Pose(Vec3(vj["rotation"][0].get<Real>(), vj["rotation"][1].get<Real>(),
                            vj["rotation"][2].get<Real>()),
                       Vec3(vj["translation"][0].get<Real>(), vj["translation"][1].get<Real>(),
                            vj["translation"][2].get<Real>()));
      view.light = light_from_json(vj["light"]);
      view.landmarks.resize(Index(vj["landmarks"].size()), 2);
      for (Index l = 0; l < view.landmarks.rows(); ++l) {
        view.landmarks(l, 0) = vj["landmarks"][l][0].get<Real>();
        view.landmarks(l, 1) = vj["landmarks"][l][1].get<Real>();
      }
      images.push_back(read_image_png(id_dir + "/" + vj["image"].get<std::string>()));
      identity.views.push_back(std::move(view));
    }
    out.identities.push_back(std::move(identity));
    out.images.push_back(std::move(images));
  }
  return out;
}

FitDataset make_fit_dataset(const GeneratedDataset& dataset) {
  FitDataset fit;
  fit.model = dataset.model.get();
  fit.camera = dataset.camera;
  fit.render_opts = dataset.render_opts;
  for (std::size_t i = 0; i < dataset.identities.size(); ++i) {
    std::vector<ViewTarget> targets;
    for (std::size_t k = 0; k < dataset.identities[i].views.size(); ++k) {
      ViewTarget t;
      t.image = dataset.images[i][k];
      t.image_flipped = t.image.flipped_horizontal();
      t.landmarks = dataset.identities[i].views[k].landmarks;
      targets.push_back(std::move(t));
    }
    fit.targets.push_back(std::move(targets));
  }
  return fit;
}

FitState make_perturbed_state(const GeneratedDataset& dataset, const ExperimentConfig& config) {
  const FitDataset fit = make_fit_dataset(dataset);
  FitState state = make_initial_state(fit, config.schedule, config.albedo_size,
                                      config.displacement_size, config.albedo_rank);
  const Rng root(config.seed);
  const Real sigma = config.init_latent_sigma;
  const Real pose_rad = config.init_pose_deg * M_PI / 180.0;

  for (std::size_t i = 0; i < dataset.identities.size(); ++i) {
    const GeneratedIdentity& gt = dataset.identities[i];
    for (std::size_t k = 0; k < gt.views.size(); ++k) {
      const Rng rng = root.stream("init/" + gt.id + "/view", std::uint64_t(k));
      ViewParams& v = state.params.views[i][k];
      v.s = gt.s;
      for (Index d = 0; d < v.s.size(); ++d)
        v.s[d] += rng.stream("s", std::uint64_t(d)).normal(0.0, sigma);
      v.psi = gt.views[k].psi;
      for (Index d = 0; d < v.psi.size(); ++d)
        v.psi[d] += rng.stream("psi", std::uint64_t(d)).normal(0.0, sigma);
      // Fixed-angle rotation offset about a random axis.
      Rng axis_rng = rng.stream("axis");
      Vec3 axis(axis_rng.normal(), axis_rng.normal(), axis_rng.normal());
      if (axis.norm() < 1e-9) axis = Vec3(0, 1, 0);
      axis.normalize();
      const Mat3 r_off = axis_angle_to_matrix(axis * pose_rad);
      const Mat3 r_init = r_off * axis_angle_to_matrix(gt.views[k].pose.rotation);
      const Eigen::AngleAxis<Real> aa(r_init);
      Vec3 t = gt.views[k].pose.translation;
      t.x() += rng.stream("tx").normal(0.0, 0.01);
      t.y() += rng.stream("ty").normal(0.0, 0.01);
      v.pose = Pose(aa.angle() * aa.axis(), t);
      v.light = SHLighting::ambient(Vec3::Constant(2.0));
    }
    // Shape-center running means start at the initial view means.
    VecX mean = VecX::Zero(dataset.model->shape_dim());
    for (const auto& v : state.params.views[i]) mean += v.s;
    state.sc_means[i] = mean / static_cast<Real>(state.params.views[i].size());
  }
  return state;
}

Mesh fitted_identity_mesh(const FitState& state, const GeneratedDataset& dataset,
                          Index identity) {
  const auto& views = state.params.views[std::size_t(identity)];
  VecX mean_s = VecX::Zero(dataset.model->shape_dim());
  for (const auto& v : views) mean_s += v.s;
  mean_s /= static_cast<Real>(views.size());
  const Mesh coarse = synthesize_coarse(*dataset.model, mean_s,
                                        VecX::Zero(dataset.model->expr_dim()));
  return apply_displacement(coarse, state.params.identities[std::size_t(identity)].displacement);
}

Mesh gt_identity_mesh(const GeneratedDataset& dataset, Index identity) {
  const GeneratedIdentity& id = dataset.identities[std::size_t(identity)];
  const Mesh coarse = synthesize_coarse(*dataset.model, id.s,
                                        VecX::Zero(dataset.model->expr_dim()));
  return apply_displacement(coarse, id.displacement);
}

EvalResult evaluate_fit(const FitState& state, const GeneratedDataset& dataset,
                        const ExperimentConfig& /*config*/) {
  EvalResult result;
  const FitDataset fit = make_fit_dataset(dataset);

  std::vector<Mesh> fitted_meshes;
  std::vector<Real> all_distances;
  for (Index i = 0; i < Index(dataset.identities.size()); ++i) {
    const Mesh pred = fitted_identity_mesh(state, dataset, i);
    const Mesh gt = gt_identity_mesh(dataset, i);
    result.per_identity.push_back(mesh_error(pred, gt));
    fitted_meshes.push_back(pred);
  }
  // Aggregate over identities (mean of the summary stats).
  for (const auto& st : result.per_identity) {
    result.aggregate.median += st.median;
    result.aggregate.mean += st.mean;
    result.aggregate.stddev += st.stddev;
  }
  const Real n_ids = static_cast<Real>(result.per_identity.size());
  result.aggregate.median /= n_ids;
  result.aggregate.mean /= n_ids;
  result.aggregate.stddev /= n_ids;

  if (fitted_meshes.size() >= 2) result.diversity_value = diversity(fitted_meshes);

  std::vector<Real> psnrs, pose_errors;
  for (std::size_t i = 0; i < dataset.identities.size(); ++i)
    for (std::size_t k = 0; k < dataset.identities[i].views.size(); ++k) {
      const Scene scene = scene_for_view(state.params, fit, Index(i), Index(k));
      const RenderedImage ren = render(scene, dataset.camera, dataset.render_opts);
      psnrs.push_back(psnr(ren.image, dataset.images[i][k]));
      pose_errors.push_back(rotation_angle_between(scene.pose.rotation,
                                                   dataset.identities[i].views[k].pose.rotation) *
                            180.0 / M_PI);
    }
  auto median_of = [](std::vector<Real> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  result.psnr_median_db = median_of(psnrs);
  result.pose_error_deg_median = median_of(pose_errors);

  const auto features = make_identity_extractor();
  for (std::size_t i = 0; i < dataset.identities.size(); ++i) {
    const Scene scene = scene_for_view(state.params, fit, Index(i), 0);
    result.id_sweeps.push_back(id_similarity_sweep(dataset.images[i][0], scene, dataset.camera,
                                                   *features, dataset.render_opts));
  }
  return result;
}

std::string EvalResult::to_json(const ExperimentConfig& config) const {
  json j;
  j["config_hash"] = hex64(config.hash());
  j["seed"] = config.seed;
  j["unit_to_mm"] = config.unit_to_mm;
  j["per_identity"] = json::array();
  for (const auto& st : per_identity)
    j["per_identity"].push_back({{"median_mm", st.median_mm(config.unit_to_mm)},
                                 {"mean_mm", st.mean_mm(config.unit_to_mm)},
                                 {"std_mm", st.stddev_mm(config.unit_to_mm)}});
  j["aggregate"] = {{"median_mm", aggregate.median_mm(config.unit_to_mm)},
                    {"mean_mm", aggregate.mean_mm(config.unit_to_mm)},
                    {"std_mm", aggregate.stddev_mm(config.unit_to_mm)}};
  j["diversity_mm"] = diversity_value * config.unit_to_mm;
  j["psnr_median_db"] = psnr_median_db;
  j["pose_error_deg_median"] = pose_error_deg_median;
  j["id_similarity"] = json::array();
  for (const auto& sweep : id_sweeps)
    j["id_similarity"].push_back(json::parse(sweep.to_json()));
  return j.dump(2);
}

std::string EvalResult::to_tables(const ExperimentConfig& config) const {
  char buf[256];
  std::string out;
  out += "Reconstruction error (per-vertex, landmark-aligned)\n";
  out += "  identity    median (mm)    mean (mm)    std (mm)\n";
  for (std::size_t i = 0; i < per_identity.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "  %-10zu %10.4f %12.4f %11.4f\n", i,
                  per_identity[i].median_mm(config.unit_to_mm),
                  per_identity[i].mean_mm(config.unit_to_mm),
                  per_identity[i].stddev_mm(config.unit_to_mm));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "  %-10s %10.4f %12.4f %11.4f\n", "all",
                aggregate.median_mm(config.unit_to_mm), aggregate.mean_mm(config.unit_to_mm),
                aggregate.stddev_mm(config.unit_to_mm));
  out += buf;
  std::snprintf(buf, sizeof(buf), "\nDIV (mean pairwise vertex distance): %.4f mm\n",
                diversity_value * config.unit_to_mm);
  out += buf;
  std::snprintf(buf, sizeof(buf), "Rendered PSNR (median): %.2f dB   Pose error (median): %.3f deg\n",
                psnr_median_db, pose_error_deg_median);
  out += buf;
  out += "\nID similarity across poses\n  identity   same      0       +-15     +-30     +-45\n";
  for (std::size_t i = 0; i < id_sweeps.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "  %-9zu %7.4f %7.4f %8.4f %8.4f %8.4f\n", i,
                  id_sweeps[i].same_pose, id_sweeps[i].yaw0, id_sweeps[i].yaw15,
                  id_sweeps[i].yaw30, id_sweeps[i].yaw45);
    out += buf;
  }
  return out;
}

}  // namespace facefit
