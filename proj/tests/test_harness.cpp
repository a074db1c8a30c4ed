#include "facefit/config.hpp"
#include "facefit/dataset.hpp"
#include "facefit/edit.hpp"
#include "facefit/io_binary.hpp"
#include "facefit/png_io.hpp"
#include "facefit/rng.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>

using namespace facefit;

namespace {

namespace fs = std::filesystem;

ExperimentConfig small_config(std::uint64_t seed = 5) {
  ExperimentConfig c;
  c.model = {2, 4, 2, 44};
  c.identities = 2;
  c.views_per_identity = 3;
  c.image_size = 32;
  c.albedo_size = 32;
  c.displacement_size = 8;
  c.schedule.shape_steps = 2;
  c.schedule.albedo_steps = 2;
  c.schedule.cycles = 1;
  c.schedule.feature_dim = 32;
  c.seed = seed;
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("gen_dataset: fixed seed reproduces the dataset bit for bit") {
  const ExperimentConfig config = small_config(9);
  const GeneratedDataset a = gen_dataset(config);
  const GeneratedDataset b = gen_dataset(config);
  REQUIRE(a.identities.size() == b.identities.size());
  for (std::size_t i = 0; i < a.identities.size(); ++i) {
    CHECK((a.identities[i].s - b.identities[i].s).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.identities[i].albedo.data() - b.identities[i].albedo.data()).cwiseAbs().maxCoeff() ==
          0.0);
    for (std::size_t k = 0; k < a.images[i].size(); ++k)
      CHECK((a.images[i][k].data() - b.images[i][k].data()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gen_dataset: counting and on-disk layout") {
  const ExperimentConfig config = small_config(10);
  const GeneratedDataset dataset = gen_dataset(config);
  CHECK(dataset.identities.size() == 2);
  CHECK(dataset.images.size() == 2);
  CHECK(dataset.images[0].size() == 3);

  TempDir dir("facefit_test_dataset");
  write_dataset(dataset, config, dir.path.string());
  CHECK(fs::exists(dir.path / "manifest.json"));
  for (const auto* id : {"000", "001"}) {
    CHECK(fs::exists(dir.path / id / "gt.json"));
    CHECK(fs::exists(dir.path / id / "albedo.f32"));
    CHECK(fs::exists(dir.path / id / "albedo.png"));
    CHECK(fs::exists(dir.path / id / "displacement.dmap"));
    for (int k = 0; k < 3; ++k)
      CHECK(fs::exists(dir.path / id / ("view_" + std::to_string(k) + ".png")));
  }

  // provenance: every sidecar carries the config hash and seed
  const auto manifest = nlohmann::json::parse(read_text_file((dir.path / "manifest.json").string()));
  CHECK(manifest["config_hash"].get<std::string>() == hex64(config.hash()));
  CHECK(manifest["seed"].get<std::uint64_t>() == config.seed);
  const auto gt = nlohmann::json::parse(read_text_file((dir.path / "000" / "gt.json").string()));
  CHECK(gt["config_hash"].get<std::string>() == hex64(config.hash()));
  CHECK(gt["seed"].get<std::uint64_t>() == config.seed);
}

TEST_CASE("gt sidecars roundtrip: re-rendering reproduces the stored images bit-exactly") {
  const ExperimentConfig config = small_config(11);
  const GeneratedDataset dataset = gen_dataset(config);
  TempDir dir("facefit_test_roundtrip");
  write_dataset(dataset, config, dir.path.string());
  const GeneratedDataset loaded = load_dataset(dir.path.string(), config);

  for (std::size_t i = 0; i < loaded.identities.size(); ++i) {
    CHECK((loaded.identities[i].s - dataset.identities[i].s).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t k = 0; k < loaded.identities[i].views.size(); ++k) {
      Scene scene;
      scene.model = loaded.model.get();
      scene.s = loaded.identities[i].s;
      scene.psi = loaded.identities[i].views[k].psi;
      scene.pose = loaded.identities[i].views[k].pose;
      scene.light = loaded.identities[i].views[k].light;
      scene.albedo = loaded.identities[i].albedo;
      scene.displacement = loaded.identities[i].displacement;
      const RenderedImage ren = render(scene, loaded.camera, loaded.render_opts);
      // both sides pass through the same 8-bit sRGB quantization
      const auto bytes_new = to_srgb8(ren.image);
      const auto bytes_stored = to_srgb8(loaded.images[i][k]);
      REQUIRE(bytes_new == bytes_stored);
    }
  }
}

TEST_CASE("png io: 8-bit image, 16-bit and 1-bit grids roundtrip") {
  TempDir dir("facefit_test_png");
  Rng rng(12);

  Image img(23, 17);
  for (Index i = 0; i < img.data().size(); ++i) img.data().data()[i] = rng.uniform();
  const std::string ip = (dir.path / "img.png").string();
  write_image_png(ip, img);
  const Image back = read_image_png(ip);
  CHECK(to_srgb8(back) == to_srgb8(img));

  MaskGrid mask(16, false);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) mask.set(x, y, rng.uniform() < 0.5);
  const std::string mp = (dir.path / "mask.png").string();
  write_mask_png(mp, mask);
  const MaskGrid mask_back = read_mask_png(mp);
  CHECK(mask_back.data() == mask.data());

  ColorGrid grid(16);
  for (Index i = 0; i < grid.data().size(); ++i) grid.data().data()[i] = rng.uniform();
  const std::string gp = (dir.path / "grid.f32").string();
  write_float_grid(gp, grid);
  const ColorGrid grid_back = read_float_grid(gp);
  CHECK((grid_back.data() - grid.data()).cwiseAbs().maxCoeff() < 1e-7);

  ColorGrid shading(16);
  for (Index i = 0; i < shading.data().size(); ++i)
    shading.data().data()[i] = rng.uniform(0.0, 3.5);
  const std::string sp = (dir.path / "shading.png").string();
  write_shading_png(sp, shading);
  const ColorGrid shading_back = read_shading_png(sp);
  CHECK((shading_back.data() - shading.data()).cwiseAbs().maxCoeff() <
        kShadingPngScale / 65535.0 + 1e-9);
}

TEST_CASE("sh lighting serializes as a 9x3 JSON array") {
  Rng rng(13);
  SHLighting light;
  for (int b = 0; b < 9; ++b)
    for (int c = 0; c < 3; ++c) light.coefficients(b, c) = rng.normal();
  nlohmann::json j = nlohmann::json::array();
  for (int b = 0; b < 9; ++b)
    j.push_back({light.coefficients(b, 0), light.coefficients(b, 1), light.coefficients(b, 2)});
  const auto parsed = nlohmann::json::parse(j.dump());
  for (int b = 0; b < 9; ++b)
    for (int c = 0; c < 3; ++c)
      REQUIRE(parsed[b][c].get<Real>() == light.coefficients(b, c));
}

TEST_CASE("edit: alpha 0 is the identity, edits invert and compose linearly") {
  const BlendshapeModel model = make_head_model({2, 6, 3, 45});
  Scene scene;
  scene.model = &model;
  Rng rng(14);
  scene.s.resize(6);
  scene.psi.resize(3);
  for (Index i = 0; i < 6; ++i) scene.s[i] = rng.normal();
  for (Index i = 0; i < 3; ++i) scene.psi[i] = rng.normal();
  scene.albedo = ColorGrid(32, Vec3(0.5, 0.5, 0.5));
  scene.light = SHLighting::ambient(Vec3::Constant(2.0));
  scene.displacement = DisplacementMap(8);

  const EditDirection dir = fit_edit_direction(6, 3, 2, "wide_jaw", 77);
  CHECK(dir.direction.norm() == doctest::Approx(1.0).epsilon(1e-12));

  const Scene zero = apply_edit(scene, dir, 0.0);
  CHECK((zero.s - scene.s).cwiseAbs().maxCoeff() == 0.0);
  CHECK((zero.psi - scene.psi).cwiseAbs().maxCoeff() == 0.0);

  const Scene there = apply_edit(scene, dir, 1.7);
  const Scene back = apply_edit(there, dir, -1.7);
  CHECK((back.s - scene.s).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.psi - scene.psi).cwiseAbs().maxCoeff() < 1e-12);

  // exact linearity: latent(a1) + latent(a2) - 2 latent = (a1 + a2 - 2*0) n
  const Scene e1 = apply_edit(scene, dir, 0.6);
  const Scene e2 = apply_edit(scene, dir, 1.1);
  VecX lhs(9), rhs(9);
  lhs << (e1.s + e2.s - 2 * scene.s), (e1.psi + e2.psi - 2 * scene.psi);
  rhs = (0.6 + 1.1) * dir.direction;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("edit: the fitted separator normal recovers the labelled axis") {
  const EditDirection dir = fit_edit_direction(8, 4, 5, "attr5", 123);
  VecX axis = VecX::Zero(12);
  axis[5] = 1.0;
  CHECK(std::abs(dir.direction.dot(axis)) > 0.99);
  CHECK_THROWS_AS(fit_edit_direction(8, 4, 99, "oob", 1), std::invalid_argument);
}

TEST_CASE("edit: rendered difference is confined to the head silhouette") {
  const BlendshapeModel model = make_head_model({2, 6, 3, 46});
  Scene scene;
  scene.model = &model;
  scene.s = VecX::Zero(6);
  scene.psi = VecX::Zero(3);
  scene.light = SHLighting::ambient(Vec3::Constant(2.0));
  ColorGrid albedo(32, Vec3(0.6, 0.5, 0.4));
  scene.albedo = albedo;
  scene.displacement = DisplacementMap(8);
  const Camera cam = Camera::orthographic(48, 48, 14.0);
  RenderOptions opts;
  opts.background = Vec3(0.1, 0.2, 0.3);
  opts.sigma_px = 0.0;  // hard silhouette for a clean confinement check

  const EditDirection dir = fit_edit_direction(6, 3, 7, "expr1", 321);  // expression axis
  const RenderedImage before = render(scene, cam, opts);
  const RenderedImage after = render(apply_edit(scene, dir, 3.0), cam, opts);

  Real diff_outside = 0;
  for (Index px = 0; px < before.alpha.size(); ++px) {
    const bool covered = before.alpha[px] > 0 || after.alpha[px] > 0;
    if (!covered)
      diff_outside = std::max(diff_outside, (after.image.data().row(px) -
                                             before.image.data().row(px)).cwiseAbs().maxCoeff());
  }
  CHECK(diff_outside == 0.0);
  CHECK((after.image.data() - before.image.data()).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("config schema: embedded copy matches the committed file") {
#ifdef FACEFIT_SOURCE_DIR
  const std::string committed =
      read_text_file(std::string(FACEFIT_SOURCE_DIR) + "/schemas/config.schema.json");
  CHECK(committed.find(ExperimentConfig::schema()) != std::string::npos);
#endif
}

TEST_CASE("config: json roundtrip, schema validation, loading") {
  ExperimentConfig config = small_config(15);
  config.schedule.shape_weights.lmk = 7.5;
  const std::string text = config.to_json();
  const ExperimentConfig back = ExperimentConfig::from_json(text);
  CHECK(back.identities == config.identities);
  CHECK(back.schedule.shape_weights.lmk == 7.5);
  CHECK(back.seed == config.seed);
  CHECK(back.hash() == config.hash());

  TempDir dir("facefit_test_config");
  const std::string path = (dir.path / "config.json").string();
  write_text_file(path, text);
  const ExperimentConfig loaded = ExperimentConfig::load(path);
  CHECK(loaded.hash() == config.hash());

  write_text_file(path, R"({"fit": {"cycles": "three"}})");
  CHECK_THROWS_AS(ExperimentConfig::load(path), std::invalid_argument);
}

TEST_CASE("make_perturbed_state: deterministic and near the ground truth") {
  const ExperimentConfig config = small_config(16);
  const GeneratedDataset dataset = gen_dataset(config);
  const FitState a = make_perturbed_state(dataset, config);
  const FitState b = make_perturbed_state(dataset, config);
  CHECK(hash_params(a.params) == hash_params(b.params));

  for (std::size_t i = 0; i < dataset.identities.size(); ++i)
    for (std::size_t k = 0; k < dataset.identities[i].views.size(); ++k) {
      const Real angle = rotation_angle_between(a.params.views[i][k].pose.rotation,
                                                dataset.identities[i].views[k].pose.rotation);
      REQUIRE(angle == doctest::Approx(config.init_pose_deg * M_PI / 180.0).epsilon(1e-6));
      REQUIRE((a.params.views[i][k].s - dataset.identities[i].s).norm() <
              4 * config.init_latent_sigma * std::sqrt(Real(config.model.shape_dim)));
    }
}

TEST_CASE("evaluate_fit: ground-truth parameters score near-perfectly") {
  ExperimentConfig config = small_config(17);
  const GeneratedDataset dataset = gen_dataset(config);
  const FitDataset fit = make_fit_dataset(dataset);
  FitState state = make_initial_state(fit, config.schedule, config.albedo_size,
                                      config.displacement_size, config.albedo_rank);
  state.params.albedo_mean = ColorGrid(config.albedo_size);
  for (std::size_t i = 0; i < dataset.identities.size(); ++i) {
    for (std::size_t k = 0; k < dataset.identities[i].views.size(); ++k) {
      ViewParams& v = state.params.views[i][k];
      v.s = dataset.identities[i].s;
      v.psi = dataset.identities[i].views[k].psi;
      v.pose = dataset.identities[i].views[k].pose;
      v.light = dataset.identities[i].views[k].light;
    }
    state.params.identities[i].albedo_residual.data() = dataset.identities[i].albedo.data();
  }
  const EvalResult result = evaluate_fit(state, dataset, config);
  CHECK(result.aggregate.median < 1e-9);
  CHECK(result.pose_error_deg_median < 1e-9);
  CHECK(result.psnr_median_db > 50.0);  // only 8-bit quantization noise remains
  CHECK(result.id_sweeps.size() == 2);
  const std::string json = result.to_json(config);
  CHECK(json.find("config_hash") != std::string::npos);
  CHECK(validate_json_schema(json, R"({"type":"object","required":["aggregate","diversity_mm","psnr_median_db"]})") == "");
  CHECK(result.to_tables(config).find("DIV") != std::string::npos);
}

TEST_SUITE_END();
