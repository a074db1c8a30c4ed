#pragma once

#include "facefit/config.hpp"
#include "facefit/fit.hpp"
#include "facefit/metrics.hpp"

#include <memory>
#include <string>
#include <vector>

namespace facefit {

struct GeneratedView {
  VecX psi;
  Pose pose;
  SHLighting light;
  MatX2 landmarks;  // normalized projections of the template landmark vertices
};

struct GeneratedIdentity {
  std::string id;
  VecX s;
  ColorGrid albedo;
  DisplacementMap displacement;
  std::vector<GeneratedView> views;
};

// The synthetic stand-in for the sampled generator outputs: identities with
// ground-truth parameters and rendered views.
struct GeneratedDataset {
  std::shared_ptr<BlendshapeModel> model;
  Camera camera;
  RenderOptions render_opts;
  std::vector<GeneratedIdentity> identities;
  std::vector<std::vector<Image>> images;  // [identity][view], linear float
};

GeneratedDataset gen_dataset(const ExperimentConfig& config);

// Directory layout: dataset/<id>/view_<k>.png, dataset/<id>/gt.json plus a
// top-level manifest.json; albedo travels as float binary + preview PNG.
void write_dataset(const GeneratedDataset& dataset, const ExperimentConfig& config,
                   const std::string& dir);
GeneratedDataset load_dataset(const std::string& dir, const ExperimentConfig& config);

// Fit inputs assembled from a generated (or loaded) dataset.
FitDataset make_fit_dataset(const GeneratedDataset& dataset);

// Ground-truth parameters perturbed per the recovery protocol: latent noise
// on s and psi, a fixed-angle random rotation offset, gray albedo, default
// ambient light, zero displacement.
FitState make_perturbed_state(const GeneratedDataset& dataset, const ExperimentConfig& config);

struct EvalResult {
  std::vector<MeshErrorStats> per_identity;
  MeshErrorStats aggregate;
  Real diversity_value = 0;
  Real psnr_median_db = 0;
  Real pose_error_deg_median = 0;
  std::vector<PoseSweepReport> id_sweeps;
  std::string to_json(const ExperimentConfig& config) const;
  std::string to_tables(const ExperimentConfig& config) const;
};

// The full metric suite over a fitted state: per-identity mesh error
// (against ground truth), diversity of the fitted meshes, rendered PSNR,
// pose error and the identity-similarity pose sweep.
EvalResult evaluate_fit(const FitState& state, const GeneratedDataset& dataset,
                        const ExperimentConfig& config);

// Fitted neutral mesh of one identity (mean shape over views, displacement applied).
Mesh fitted_identity_mesh(const FitState& state, const GeneratedDataset& dataset, Index identity);
Mesh gt_identity_mesh(const GeneratedDataset& dataset, Index identity);

}  // namespace facefit
