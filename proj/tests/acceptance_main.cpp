// Acceptance suite: runs every top-level criterion at its pinned tolerance
// and prints one pass/fail line each. Exit code 0 only when all pass.

#include "facefit/dataset.hpp"
#include "facefit/io_binary.hpp"
#include "facefit/metrics.hpp"
#include "facefit/obj_io.hpp"

#include "gradcheck.hpp"
#include "texscene.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

using namespace facefit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Criterion {
  int number;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// The end-to-end recovery protocol configuration (also the CLI default,
// with the cheaper feature dimension and the faster shape learning rate
// used for the desk-scale recovery runs).
ExperimentConfig e2e_config() {
  ExperimentConfig config;
  config.schedule.feature_dim = 128;
  config.schedule.shape_adam.learning_rate = 1e-3;
  return config;
}

ExperimentConfig determinism_config() {
  ExperimentConfig config;
  config.model = {2, 6, 3, 91};
  config.identities = 2;
  config.views_per_identity = 3;
  config.image_size = 32;
  config.albedo_size = 32;
  config.displacement_size = 8;
  config.schedule.cycles = 2;
  config.schedule.shape_steps = 4;
  config.schedule.albedo_steps = 4;
  config.schedule.feature_dim = 32;
  config.seed = 21;
  return config;
}

// -------------------------------------------------------------------------

Criterion criterion_gradients() {
  Criterion c;
  c.number = 1;
  c.name = "gradient correctness (analytic vs central differences, h=1e-4)";
  const auto t0 = Clock::now();
  const BlendshapeModel model = make_head_model({3, 6, 3, 606});
  const Camera cam = Camera::orthographic(48, 48, 18.0);
  gradcheck::CheckStats stats;
  // 100 trials per parameter group, split over four random scenes
  for (std::uint64_t seed = 50; seed < 54; ++seed) {
    const Scene scene = gradcheck::make_check_scene(model, seed);
    stats.merge(gradcheck::check_all_groups(model, scene, cam, 25, seed * 71));
  }
  c.seconds = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d trials/group x 7 groups, worst rel %.2e, %d failures, %.0f s",
                100, stats.worst_rel, stats.failed, c.seconds);
  c.detail = buf;
  c.passed = stats.failed == 0 && stats.worst_rel < 1e-3 && c.seconds < 300.0 &&
             stats.trials >= 700;
  return c;
}

Criterion criterion_sh() {
  Criterion c;
  c.number = 2;
  c.name = "spherical harmonics correctness";
  const auto t0 = Clock::now();
  bool ok = true;

  // pinned constant table
  ok = ok && std::abs(kSH0 - 0.28209479177387814) < 1e-15;
  const Vec9 pole = sh_basis(Vec3(0, 0, 1));
  ok = ok && std::abs(pole[0] - 0.28209479) < 1e-8;
  ok = ok && std::abs(pole[2] - 0.48860251) < 1e-8;
  ok = ok && pole[1] == 0.0 && pole[3] == 0.0;
  const Vec9 px = sh_basis(Vec3(1, 0, 0));
  ok = ok && std::abs(px[3] - 0.48860251) < 1e-8;
  ok = ok && std::abs(px[8] - 0.54627422) < 1e-8;

  // Monte-Carlo Gram matrix over 10^6 uniform samples
  Rng rng(777);
  Eigen::Matrix<Real, 9, 9> gram = Eigen::Matrix<Real, 9, 9>::Zero();
  for (int i = 0; i < 1000000; ++i) {
    const Real z = rng.uniform(-1.0, 1.0);
    const Real phi = rng.uniform(0.0, 2.0 * M_PI);
    const Real r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec9 h = sh_basis(Vec3(r * std::cos(phi), r * std::sin(phi), z));
    gram += h * h.transpose();
  }
  gram *= 4.0 * M_PI / 1000000.0;
  const Real gram_err = (gram - Eigen::Matrix<Real, 9, 9>::Identity()).cwiseAbs().maxCoeff();
  ok = ok && gram_err < 0.01;

  // exact pre-clamp linearity of the shading map
  NormalGrid normals;
  normals.n = 16;
  normals.normals.resize(256, 3);
  for (Index i = 0; i < 256; ++i) {
    const Real z = rng.uniform(-1.0, 1.0);
    const Real phi = rng.uniform(0.0, 2.0 * M_PI);
    const Real r = std::sqrt(std::max(0.0, 1.0 - z * z));
    normals.normals.row(i) = Vec3(r * std::cos(phi), r * std::sin(phi), z).transpose();
  }
  SHLighting l1, l2, sum;
  for (int b = 0; b < 9; ++b)
    for (int ch = 0; ch < 3; ++ch) {
      l1.coefficients(b, ch) = rng.normal();
      l2.coefficients(b, ch) = rng.normal();
    }
  sum.coefficients = l1.coefficients + l2.coefficients;
  const ColorGrid s1 = shading_from_normals(normals, l1, false);
  const ColorGrid s2 = shading_from_normals(normals, l2, false);
  const ColorGrid s12 = shading_from_normals(normals, sum, false);
  const Real lin_err = (s12.data() - s1.data() - s2.data()).cwiseAbs().maxCoeff();
  ok = ok && lin_err < 1e-12;

  c.seconds = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "constants pinned, MC gram err %.4f < 0.01, linearity %.1e",
                gram_err, lin_err);
  c.detail = buf;
  c.passed = ok;
  return c;
}

Criterion criterion_albedo_pipeline() {
  Criterion c;
  c.number = 3;
  c.name = "albedo pipeline roundtrip";
  const auto t0 = Clock::now();

  // frontal scene
  const texscene::TexScene frontal = texscene::make_tex_scene(28, false, 0.0);
  const Mesh mesh_f = frontal.mesh();
  const RenderedImage ren_f = render(frontal.scene, frontal.camera);
  const GtAlbedoResult res_f =
      build_gt_albedo(ren_f.image, mesh_f, frontal.scene.pose, frontal.camera, frontal.chart);
  const Real light_err =
      (res_f.light.coefficients - frontal.scene.light.coefficients).cwiseAbs().maxCoeff();
  Real mae = 0;
  Index count = 0;
  const int n = frontal.chart.n;
  for (Index t = 0; t < frontal.chart.texels(); ++t) {
    const int x = static_cast<int>(t % n), y = static_cast<int>(t / n);
    if (!res_f.visible.at(x, y)) continue;
    const Real u = (x + 0.5) / n, v = (y + 0.5) / n;
    mae += (res_f.albedo.at(x, y) - frontal.scene.albedo.sample(u, v)).cwiseAbs().mean();
    ++count;
  }
  mae /= Real(count);

  // 30-degree yaw, bilaterally symmetric scene: occluded side via the mirror
  const texscene::TexScene yawed = texscene::make_tex_scene(29, true, 30.0 * M_PI / 180.0);
  const Mesh mesh_y = yawed.mesh();
  const RenderedImage ren_y = render(yawed.scene, yawed.camera);
  const GtAlbedoResult res_y =
      build_gt_albedo(ren_y.image, mesh_y, yawed.scene.pose, yawed.camera, yawed.chart);
  Real occluded_mae = 0;
  Index occluded_count = 0;
  for (Index t = 0; t < yawed.chart.texels(); ++t) {
    const int x = static_cast<int>(t % n), y = static_cast<int>(t / n);
    if (yawed.chart.face[std::size_t(t)] < 0) continue;
    if (res_y.visible.at(x, y)) continue;
    const std::int32_t m = yawed.chart.mirror[std::size_t(t)];
    if (m < 0 || m == static_cast<std::int32_t>(t)) continue;
    if (!res_y.visible.at(static_cast<int>(m % n), static_cast<int>(m / n))) continue;
    if (yawed.chart.rest_position(t, 2) < 0.25) continue;
    const Real u = (x + 0.5) / n, v = (y + 0.5) / n;
    occluded_mae += (res_y.albedo.at(x, y) - yawed.scene.albedo.sample(u, v)).cwiseAbs().mean();
    ++occluded_count;
  }
  occluded_mae /= Real(occluded_count);

  c.seconds = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "frontal albedo MAE %.4f < 0.03 (%ld texels), light %.4f < 0.05/coef; "
                "30-deg occluded MAE %.4f < 0.05 (%ld texels)",
                mae, long(count), light_err, occluded_mae, long(occluded_count));
  c.detail = buf;
  c.passed = mae < 0.03 && light_err < 0.05 && occluded_mae < 0.05 && count > 400 &&
             occluded_count > 20;
  return c;
}

Criterion criterion_end_to_end() {
  Criterion c;
  c.number = 4;
  c.name = "end-to-end recovery (5 identities x 11 views)";
  const auto t0 = Clock::now();
  const ExperimentConfig config = e2e_config();
  const GeneratedDataset dataset = gen_dataset(config);
  const FitDataset fit = make_fit_dataset(dataset);
  FitState state = make_perturbed_state(dataset, config);
  alternate(state, fit, config.schedule);
  const EvalResult result = evaluate_fit(state, dataset, config);
  c.seconds = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "PSNR %.2f dB > 30, median vertex error %.5f < 0.005 units, "
                "pose error %.3f < 1 deg, %.0f s < 1800 s",
                result.psnr_median_db, result.aggregate.median, result.pose_error_deg_median,
                c.seconds);
  c.detail = buf;
  c.passed = result.psnr_median_db > 30.0 && result.aggregate.median < 0.005 &&
             result.pose_error_deg_median < 1.0 && c.seconds < 1800.0;
  return c;
}

Criterion criterion_metric_oracles() {
  Criterion c;
  c.number = 5;
  c.name = "metric oracles (diversity brute force, rigid invariance, offset)";
  const auto t0 = Clock::now();
  bool ok = true;

  const BlendshapeModel model = make_head_model({3, 6, 3, 92});
  std::vector<Mesh> meshes;
  for (int k = 0; k < 5; ++k) {
    Rng rng(400 + k);
    VecX s(model.shape_dim()), psi(model.expr_dim());
    for (Index i = 0; i < s.size(); ++i) s[i] = rng.normal(0, 3.0);
    for (Index i = 0; i < psi.size(); ++i) psi[i] = rng.normal(0, 2.0);
    meshes.push_back(synthesize_coarse(model, s, psi));
  }
  const Real div = diversity(meshes);
  Real brute = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < meshes.size(); ++i)
    for (std::size_t j = i + 1; j < meshes.size(); ++j) {
      Real mean_dist = 0;
      for (Index v = 0; v < meshes[i].vertex_count(); ++v)
        mean_dist += (meshes[i].vertices.row(v) - meshes[j].vertices.row(v)).norm();
      brute += mean_dist / Real(meshes[i].vertex_count());
      ++pairs;
    }
  brute /= pairs;
  const Real div_err = std::abs(div - brute);
  ok = ok && div_err < 1e-10;

  // rigid invariance of mesh_error
  const Mesh gt = model.template_mesh();
  Mesh moved = gt;
  moved.vertices = (gt.vertices * axis_angle_to_matrix(Vec3(0.3, 0.5, -0.2)).transpose())
                       .rowwise() +
                   Vec3(1.0, -0.5, 0.25).transpose();
  const MeshErrorStats rigid_stats = mesh_error(moved, gt);
  ok = ok && rigid_stats.mean < 1e-6 && rigid_stats.median < 1e-6;

  // constructed radial offset on a balanced-landmark sphere
  Mesh sphere = make_icosphere(3);
  {
    auto topo = std::make_shared<Topology>(*sphere.topology);
    std::vector<int> landmarks;
    std::vector<char> used(std::size_t(sphere.vertex_count()), 0);
    for (Index i = 0; i < sphere.vertex_count() && landmarks.size() < 68; ++i) {
      if (used[std::size_t(i)]) continue;
      for (Index j = 0; j < sphere.vertex_count(); ++j)
        if ((sphere.vertices.row(j) + sphere.vertices.row(i)).norm() < 1e-9) {
          if (!used[std::size_t(j)]) {
            used[std::size_t(i)] = used[std::size_t(j)] = 1;
            landmarks.push_back(static_cast<int>(i));
            landmarks.push_back(static_cast<int>(j));
          }
          break;
        }
    }
    topo->landmarks = landmarks;
    sphere.topology = topo;
  }
  Mesh offset = sphere;
  offset.vertices *= 1.001;
  const MeshErrorStats offset_stats = mesh_error(offset, sphere);
  const bool offset_ok = std::abs(offset_stats.median - 0.001) < 1e-9 &&
                         std::abs(offset_stats.mean - 0.001) < 1e-9 &&
                         offset_stats.stddev < 1e-9;
  ok = ok && offset_ok;

  c.seconds = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "DIV brute-force err %.1e < 1e-10, rigid residual %.1e < 1e-6, "
                "0.001 offset -> median %.6f mean %.6f std %.1e",
                div_err, rigid_stats.mean, offset_stats.median, offset_stats.mean,
                offset_stats.stddev);
  c.detail = buf;
  c.passed = ok;
  return c;
}

Criterion criterion_loss_algebra() {
  Criterion c;
  c.number = 6;
  c.name = "loss algebra (zeros, stage weights, brute-force oracles)";
  const auto t0 = Clock::now();
  bool ok = true;

  // every loss is zero on identical inputs
  const auto fid = make_identity_extractor(64);
  Rng rng(93);
  Image img(24, 24);
  for (Index i = 0; i < img.data().size(); ++i) img.data().data()[i] = rng.uniform(0.1, 0.9);
  ok = ok && identity_loss(img, img, *fid) == 0.0;
  ok = ok && sym_rec_loss(img, img, img, img) == 0.0;
  ok = ok && perceptual_loss(img, img, *fid) == 0.0;
  MatX2 lmk(68, 2);
  for (Index i = 0; i < lmk.size(); ++i) lmk.data()[i] = rng.uniform();
  ok = ok && landmark_loss(lmk, lmk) == 0.0;
  VecX v(6);
  for (Index i = 0; i < 6; ++i) v[i] = rng.normal();
  ok = ok && shape_center_loss({{v, v, v}}) == 0.0;
  ok = ok && reg_loss(VecX::Zero(4), VecX::Zero(2), ScalarGrid(4)) == 0.0;

  // default shape-stage weights on unit terms
  const LossReport unit = total_loss(
      LossStage::kShape,
      {{"id", 1.0}, {"perc", 1.0}, {"lmk", 1.0}, {"sc", 1.0}, {"reg", 1.0}},
      LossWeights::shape_stage_defaults());
  const bool weights_ok = unit.total == 7.5001;
  ok = ok && weights_ok;

  // shape-center loss against a two-pass brute force
  Real sc_err = 0;
  {
    std::vector<std::vector<VecX>> groups;
    for (int g = 0; g < 5; ++g) {
      std::vector<VecX> group;
      for (int k = 0; k < 4 + g; ++k) {
        VecX s(7);
        for (Index i = 0; i < 7; ++i) s[i] = rng.normal();
        group.push_back(s);
      }
      groups.push_back(group);
    }
    Real brute = 0;
    for (const auto& group : groups) {
      VecX mu = VecX::Zero(7);
      for (const auto& s : group) mu += s;
      mu /= Real(group.size());
      for (const auto& s : group) brute += (s - mu).squaredNorm();
    }
    sc_err = std::abs(shape_center_loss(groups) - brute);
    ok = ok && sc_err < 1e-10;
  }

  // regularizer against a scalar brute force
  Real reg_err = 0;
  {
    VecX s(16), psi(8);
    for (Index i = 0; i < 16; ++i) s[i] = rng.normal();
    for (Index i = 0; i < 8; ++i) psi[i] = rng.normal();
    ScalarGrid d(16);
    for (Index i = 0; i < d.texels(); ++i) d.data()[i] = rng.normal(0, 0.005);
    Real brute = 0;
    for (Index i = 0; i < 16; ++i) brute += s[i] * s[i];
    for (Index i = 0; i < 8; ++i) brute += psi[i] * psi[i];
    for (Index i = 0; i < d.texels(); ++i) brute += d.data()[i] * d.data()[i];
    reg_err = std::abs(reg_loss(s, psi, d) - brute);
    ok = ok && reg_err < 1e-10;
  }

  c.seconds = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "zeros exact, unit-term total %s 7.5001, shape-center err %.1e, regularizer err %.1e",
                weights_ok ? "==" : "!=", sc_err, reg_err);
  c.detail = buf;
  c.passed = ok;
  return c;
}

Criterion criterion_determinism() {
  Criterion c;
  c.number = 7;
  c.name = "determinism and provenance (gen -> fit -> eval twice)";
  const auto t0 = Clock::now();
  const ExperimentConfig config = determinism_config();

  auto full_run = [&]() {
    const GeneratedDataset dataset = gen_dataset(config);
    const FitDataset fit = make_fit_dataset(dataset);
    FitState state = make_perturbed_state(dataset, config);
    alternate(state, fit, config.schedule);
    const EvalResult result = evaluate_fit(state, dataset, config);
    return std::make_pair(result.to_json(config), state);
  };
  auto [json_a, state_a] = full_run();
  auto [json_b, state_b] = full_run();
  const bool metrics_identical = json_a == json_b;
  const bool provenance_ok = json_a.find(hex64(config.hash())) != std::string::npos;

  // checkpoint-resume equals the uninterrupted run
  const std::string ck = (fs::temp_directory_path() / "facefit_acceptance_ck.bin").string();
  const GeneratedDataset dataset = gen_dataset(config);
  const FitDataset fit = make_fit_dataset(dataset);
  FitState part = make_perturbed_state(dataset, config);
  AlternationSchedule first = config.schedule;
  first.cycles = 1;
  alternate(part, fit, first);
  part.save_checkpoint(ck);
  FitState resumed = FitState::load_checkpoint(ck, *dataset.model);
  alternate(resumed, fit, config.schedule);
  const bool resume_ok = hash_params(resumed.params) == hash_params(state_a.params);
  fs::remove(ck);
  fs::remove(ck + ".json");

  c.seconds = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "metrics byte-identical: %s, provenance stamped: %s, resume == uninterrupted: %s",
                metrics_identical ? "yes" : "NO", provenance_ok ? "yes" : "NO",
                resume_ok ? "yes" : "NO");
  c.detail = buf;
  c.passed = metrics_identical && provenance_ok && resume_ok;
  return c;
}

Criterion criterion_performance(const std::string& baseline_path) {
  Criterion c;
  c.number = 8;
  c.name = "performance floor (128x128 single-threaded)";
  const auto t0 = Clock::now();
  const BlendshapeModel model = make_head_model({});
  const BenchReport report = benchmark_runtime(model, 128);
  bool ok = report.forward_render_ms < 50.0 && report.gradient_step_ms < 500.0;

  std::string baseline_note = "no baseline";
  if (!baseline_path.empty() && fs::exists(baseline_path)) {
    const auto baseline = nlohmann::json::parse(read_text_file(baseline_path));
    const Real fwd_base = baseline["forward_render_ms"].get<Real>();
    const Real grad_base = baseline["gradient_step_ms"].get<Real>();
    const bool within = report.forward_render_ms <= fwd_base * 1.3 &&
                        report.gradient_step_ms <= grad_base * 1.3;
    baseline_note = within ? "within +30% of baseline" : "REGRESSION beyond +30% of baseline";
    ok = ok && within;
  }

  c.seconds = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof(buf), "forward %.2f ms < 50, gradient step %.2f ms < 500 (%s)",
                report.forward_render_ms, report.gradient_step_ms, baseline_note.c_str());
  c.detail = buf;
  c.passed = ok;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  std::string baseline;
#ifdef FACEFIT_SOURCE_DIR
  baseline = std::string(FACEFIT_SOURCE_DIR) + "/baselines/bench_baseline.json";
#endif
  std::string only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) only = argv[++i];
  }

  std::vector<std::function<Criterion()>> criteria = {
      [] { return criterion_gradients(); },
      [] { return criterion_sh(); },
      [] { return criterion_albedo_pipeline(); },
      [] { return criterion_end_to_end(); },
      [] { return criterion_metric_oracles(); },
      [] { return criterion_loss_algebra(); },
      [] { return criterion_determinism(); },
      [&] { return criterion_performance(baseline); },
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::to_string(i + 1) != only) continue;
    const Criterion c = criteria[i]();
    std::printf("[%s] %d. %s: %s\n", c.passed ? "PASS" : "FAIL", c.number, c.name.c_str(),
                c.detail.c_str());
    std::fflush(stdout);
    if (!c.passed) ++failures;
  }
  if (failures) std::printf("%d criterion(s) FAILED\n", failures);
  return failures == 0 ? 0 : 1;
}
