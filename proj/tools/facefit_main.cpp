// facefit command line: synthetic dataset generation, alternating-descent
// fitting, rendering, metrics and latent editing.

#include "facefit/config.hpp"
#include "facefit/dataset.hpp"
#include "facefit/edit.hpp"
#include "facefit/io_binary.hpp"
#include "facefit/metrics.hpp"
#include "facefit/obj_io.hpp"
#include "facefit/png_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

using namespace facefit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "runs/default";
  std::optional<std::uint64_t> seed;
  bool json_output = false;
};

ExperimentConfig resolve_config(const GlobalArgs& args) {
  ExperimentConfig config;
  if (!args.config_path.empty()) {
    try {
      config = ExperimentConfig::load(args.config_path);
    } catch (const std::invalid_argument&) {
      throw;
    } catch (const std::exception& e) {
      throw std::invalid_argument(std::string("config: ") + e.what());
    }
  }
  if (args.seed) config.seed = *args.seed;
  return config;
}

void write_resolved_config(const ExperimentConfig& config, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_text_file(out_dir + "/config.json", config.to_json() + "\n");
}

int run_gen(const GlobalArgs& args) {
  const ExperimentConfig config = resolve_config(args);
  write_resolved_config(config, args.out_dir);
  const GeneratedDataset dataset = gen_dataset(config);
  const std::string dir = args.out_dir + "/dataset";
  write_dataset(dataset, config, dir);
  if (args.json_output) {
    json j;
    j["dataset"] = dir;
    j["identities"] = dataset.identities.size();
    j["views_per_identity"] = config.views_per_identity;
    j["config_hash"] = hex64(config.hash());
    std::cout << j.dump() << "\n";
  } else {
    std::printf("wrote %zu identities x %d views to %s\n", dataset.identities.size(),
                config.views_per_identity, dir.c_str());
  }
  return 0;
}

int run_fit(const GlobalArgs& args, const std::string& dataset_dir_arg,
            const std::string& resume_path) {
  const ExperimentConfig config = resolve_config(args);
  write_resolved_config(config, args.out_dir);
  const std::string dataset_dir =
      dataset_dir_arg.empty() ? args.out_dir + "/dataset" : dataset_dir_arg;
  const GeneratedDataset dataset = load_dataset(dataset_dir, config);
  const FitDataset fit = make_fit_dataset(dataset);

  FitState state = resume_path.empty() ? make_perturbed_state(dataset, config)
                                       : FitState::load_checkpoint(resume_path, *dataset.model);

  const std::string trace_path = args.out_dir + "/trace.jsonl";
  std::ofstream trace(trace_path, resume_path.empty() ? std::ios::trunc : std::ios::app);
  auto on_step = [&](const TraceEntry& entry) {
    json j = json::parse(entry.report.to_json());
    j["cycle"] = entry.cycle;
    j["phase"] = entry.phase;
    j["step"] = entry.step;
    trace << j.dump() << "\n";
  };

  const std::string checkpoint = args.out_dir + "/checkpoint.bin";
  alternate(state, fit, config.schedule, checkpoint, on_step);
  json run_info;
  run_info["config_hash"] = hex64(config.hash());
  run_info["seed"] = config.seed;
  state.save_checkpoint(checkpoint, run_info.dump());

  if (args.json_output) {
    json j;
    j["checkpoint"] = checkpoint;
    j["trace"] = trace_path;
    j["steps"] = state.trace.size();
    j["final_total"] = state.trace.empty() ? 0.0 : state.trace.back().report.total;
    std::cout << j.dump() << "\n";
  } else {
    std::printf("fit complete: %zu steps, checkpoint at %s\n", state.trace.size(),
                checkpoint.c_str());
  }
  return 0;
}

int run_render(const GlobalArgs& args, const std::string& checkpoint, int identity, int view,
               const std::string& image_out) {
  const ExperimentConfig config = resolve_config(args);
  fs::create_directories(args.out_dir);
  const GeneratedDataset dataset = load_dataset(args.out_dir + "/dataset", config);
  const FitDataset fit = make_fit_dataset(dataset);

  Scene scene;
  if (!checkpoint.empty()) {
    const FitState state = FitState::load_checkpoint(checkpoint, *dataset.model);
    scene = scene_for_view(state.params, fit, identity, view);
  } else {
    const GeneratedIdentity& gt = dataset.identities[std::size_t(identity)];
    scene.model = dataset.model.get();
    scene.s = gt.s;
    scene.psi = gt.views[std::size_t(view)].psi;
    scene.pose = gt.views[std::size_t(view)].pose;
    scene.light = gt.views[std::size_t(view)].light;
    scene.albedo = gt.albedo;
    scene.displacement = gt.displacement;
  }
  const RenderedImage ren = render(scene, dataset.camera, dataset.render_opts);
  const std::string png = image_out.empty() ? args.out_dir + "/render.png" : image_out;
  write_image_png(png, ren.image);
  write_float_image(png + ".f32", ren.image);

  json scene_json;
  scene_json["provenance"] = ren.provenance;
  scene_json["identity"] = identity;
  scene_json["view"] = view;
  scene_json["camera"] = {{"width", dataset.camera.width},
                          {"height", dataset.camera.height},
                          {"mode", dataset.camera.mode == Camera::Mode::kOrthographic
                                       ? "orthographic"
                                       : "perspective"},
                          {"scale", dataset.camera.scale}};
  scene_json["renderer"] = {{"sigma_px", dataset.render_opts.sigma_px},
                            {"background",
                             {dataset.render_opts.background.x(),
                              dataset.render_opts.background.y(),
                              dataset.render_opts.background.z()}}};
  write_text_file(png + ".scene.json", scene_json.dump(2) + "\n");

  if (args.json_output) {
    json j;
    j["image"] = png;
    j["provenance"] = ren.provenance;
    std::cout << j.dump() << "\n";
  } else {
    std::printf("rendered identity %d view %d to %s\n", identity, view, png.c_str());
  }
  return 0;
}

int run_eval(const GlobalArgs& args, const std::string& pred_obj, const std::string& gt_obj,
             const std::string& checkpoint) {
  const ExperimentConfig config = resolve_config(args);

  if (!pred_obj.empty() || !gt_obj.empty()) {
    if (pred_obj.empty() || gt_obj.empty()) {
      std::fprintf(stderr, "eval: --pred and --gt must be given together\n");
      return 2;
    }
    const Mesh pred = read_obj(pred_obj);
    const Mesh gt = read_obj(gt_obj);
    const MeshErrorStats stats = mesh_error(pred, gt);
    if (args.json_output) {
      json j;
      j["median_mm"] = stats.median_mm(config.unit_to_mm);
      j["mean_mm"] = stats.mean_mm(config.unit_to_mm);
      j["std_mm"] = stats.stddev_mm(config.unit_to_mm);
      std::cout << j.dump() << "\n";
    } else {
      std::printf("mesh error: median %.4f mm, mean %.4f mm, std %.4f mm\n",
                  stats.median_mm(config.unit_to_mm), stats.mean_mm(config.unit_to_mm),
                  stats.stddev_mm(config.unit_to_mm));
    }
    return 0;
  }

  const GeneratedDataset dataset = load_dataset(args.out_dir + "/dataset", config);
  const std::string ck = checkpoint.empty() ? args.out_dir + "/checkpoint.bin" : checkpoint;
  const FitState state = FitState::load_checkpoint(ck, *dataset.model);
  const EvalResult result = evaluate_fit(state, dataset, config);
  const std::string metrics_path = args.out_dir + "/metrics.json";
  write_text_file(metrics_path, result.to_json(config) + "\n");
  if (args.json_output)
    std::cout << result.to_json(config) << "\n";
  else
    std::cout << result.to_tables(config) << "\nmetrics written to " << metrics_path << "\n";
  return 0;
}

int run_edit(const GlobalArgs& args, const std::string& checkpoint, int identity, int attribute,
             Real alpha, const std::string& label) {
  const ExperimentConfig config = resolve_config(args);
  fs::create_directories(args.out_dir);
  const GeneratedDataset dataset = load_dataset(args.out_dir + "/dataset", config);
  const FitDataset fit = make_fit_dataset(dataset);
  const std::string ck = checkpoint.empty() ? args.out_dir + "/checkpoint.bin" : checkpoint;
  const FitState state = FitState::load_checkpoint(ck, *dataset.model);

  const Scene scene = scene_for_view(state.params, fit, identity, 0);
  const EditDirection direction =
      fit_edit_direction(dataset.model->shape_dim(), dataset.model->expr_dim(), attribute,
                         label.empty() ? "attr" + std::to_string(attribute) : label,
                         config.seed ^ 0xed17);
  const Scene edited = apply_edit(scene, direction, alpha);

  const std::string before = args.out_dir + "/edit_before.png";
  const std::string after = args.out_dir + "/edit_after.png";
  write_image_png(before, render(scene, dataset.camera, dataset.render_opts).image);
  write_image_png(after, render(edited, dataset.camera, dataset.render_opts).image);

  if (args.json_output) {
    json j;
    j["before"] = before;
    j["after"] = after;
    j["label"] = direction.label;
    j["alpha"] = alpha;
    std::cout << j.dump() << "\n";
  } else {
    std::printf("edit '%s' (alpha %.2f): %s -> %s\n", direction.label.c_str(), alpha,
                before.c_str(), after.c_str());
  }
  return 0;
}

int run_bench(const GlobalArgs& args, int image_size, const std::string& baseline_path) {
  const ExperimentConfig config = resolve_config(args);
  const BlendshapeModel model = make_head_model(config.model);
  const BenchReport report = benchmark_runtime(model, image_size);
  fs::create_directories(args.out_dir);
  const std::string path = args.out_dir + "/bench.json";
  write_text_file(path, report.to_json() + "\n");
  if (args.json_output)
    std::cout << report.to_json() << "\n";
  else
    std::printf("forward render: %.2f ms, gradient step: %.2f ms (image %d, %ld vertices)\n",
                report.forward_render_ms, report.gradient_step_ms, report.image_size,
                long(report.vertex_count));

  if (!baseline_path.empty()) {
    const json baseline = json::parse(read_text_file(baseline_path));
    const Real fwd_base = baseline["forward_render_ms"].get<Real>();
    const Real grad_base = baseline["gradient_step_ms"].get<Real>();
    const bool fwd_ok = report.forward_render_ms <= fwd_base * 1.3;
    const bool grad_ok = report.gradient_step_ms <= grad_base * 1.3;
    if (!fwd_ok || !grad_ok) {
      std::fprintf(stderr, "bench: regression beyond +30%% of baseline (%s)\n",
                   baseline_path.c_str());
      return 1;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facefit: inverse-rendering toolkit for synthetic 3D heads"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs args;
  app.add_option("--config", args.config_path, "experiment config JSON")->capture_default_str();
  app.add_option("--out", args.out_dir, "output directory")->capture_default_str();
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override the config seed");
  app.add_flag("--json", args.json_output, "machine-readable output");

  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  std::string fit_dataset_dir, fit_resume;
  auto* fit = app.add_subcommand("fit", "alternating-descent fit of a dataset");
  fit->add_option("--dataset", fit_dataset_dir, "dataset directory (default <out>/dataset)");
  fit->add_option("--resume", fit_resume, "resume from a checkpoint");
  std::string render_checkpoint, render_image;
  int render_identity = 0, render_view = 0;
  auto* rend = app.add_subcommand("render", "render a fitted or ground-truth scene");
  rend->add_option("--checkpoint", render_checkpoint, "fitted checkpoint (omit for ground truth)");
  rend->add_option("--identity", render_identity, "identity index");
  rend->add_option("--view", render_view, "view index");
  rend->add_option("--image", render_image, "output PNG path");
  std::string eval_pred, eval_gt, eval_checkpoint;
  auto* eval = app.add_subcommand("eval", "mesh error between OBJs, or the full metric suite");
  eval->add_option("--pred", eval_pred, "predicted mesh OBJ");
  eval->add_option("--gt", eval_gt, "ground-truth mesh OBJ");
  eval->add_option("--checkpoint", eval_checkpoint, "fitted checkpoint");
  std::string edit_checkpoint, edit_label;
  int edit_identity = 0, edit_attribute = 0;
  Real edit_alpha = 0.9;  // three sigmas of a typical coefficient
  auto* edit = app.add_subcommand("edit", "move a fitted latent along a semantic direction");
  edit->add_option("--checkpoint", edit_checkpoint, "fitted checkpoint");
  edit->add_option("--identity", edit_identity, "identity index");
  edit->add_option("--attribute", edit_attribute, "coefficient index in (shape + expression)");
  edit->add_option("--alpha", edit_alpha, "edit strength")->capture_default_str();
  edit->add_option("--label", edit_label, "direction label");
  int bench_image = 128;
  std::string bench_baseline;
  auto* bench = app.add_subcommand("bench", "time the core pipeline");
  bench->add_option("--image-size", bench_image, "render resolution")->capture_default_str();
  bench->add_option("--baseline", bench_baseline, "baseline JSON for regression tracking");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (seed_opt->count() > 0) args.seed = seed_value;

  try {
    if (gen->parsed()) return run_gen(args);
    if (fit->parsed()) return run_fit(args, fit_dataset_dir, fit_resume);
    if (rend->parsed())
      return run_render(args, render_checkpoint, render_identity, render_view, render_image);
    if (eval->parsed()) return run_eval(args, eval_pred, eval_gt, eval_checkpoint);
    if (edit->parsed())
      return run_edit(args, edit_checkpoint, edit_identity, edit_attribute, edit_alpha,
                      edit_label);
    if (bench->parsed()) return run_bench(args, bench_image, bench_baseline);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "facefit: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "facefit: %s\n", e.what());
    return 1;
  }
  return 2;
}
