#pragma once

#include "facefit/adam.hpp"
#include "facefit/losses.hpp"
#include "facefit/render.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace facefit {

// One observed view: the target image plus the view-owned parameters.
struct ViewParams {
  VecX s;
  VecX psi;
  Pose pose;
  SHLighting light;
};

// Identity-owned parameters: the albedo surrogate (shared low-rank basis
// coefficients plus a per-texel residual) and the displacement field.
struct IdentityParams {
  VecX albedo_coeffs;
  ColorGrid albedo_residual;
  DisplacementMap displacement;
};

// The optimizable stand-in for the generator networks: a shared optimizable
// low-rank albedo basis plus per-identity/per-view parameters.
struct FitParams {
  ColorGrid albedo_mean;                // shared, fixed gray by default
  std::vector<ColorGrid> albedo_basis;  // shared components, optimizable
  std::vector<IdentityParams> identities;
  std::vector<std::vector<ViewParams>> views;  // [identity][view]

  ColorGrid albedo_for(Index identity) const;
  Index identity_count() const { return Index(identities.size()); }
};

struct ViewTarget {
  Image image;
  Image image_flipped;  // cached horizontal mirror
  MatX2 landmarks;      // 68 x 2, normalized image coordinates
};

struct FitDataset {
  const BlendshapeModel* model = nullptr;
  Camera camera;
  RenderOptions render_opts;
  std::vector<std::vector<ViewTarget>> targets;  // [identity][view]
};

struct AlternationSchedule {
  int shape_steps = 300;
  int albedo_steps = 300;
  int cycles = 3;
  AdamParams shape_adam{1e-4, 0.0, 0.99, 1e-8};
  AdamParams albedo_adam{2e-3, 0.0, 0.99, 1e-8};
  LossWeights shape_weights = LossWeights::shape_stage_defaults();
  LossWeights albedo_weights = LossWeights::albedo_stage_defaults();
  Real sc_mean_decay = 0.99;  // running-mean decay for the shape-center term
  Index feature_dim = 512;
  int checkpoint_every_phase = 1;  // checkpoint after every phase when > 0

  void validate() const;
};

struct TraceEntry {
  int cycle = 0;
  std::string phase;
  int step = 0;
  LossReport report;
};

// Everything the alternation carries between phases: parameters, optimizer
// state per group, running shape-center means and position in the schedule.
struct FitState {
  FitParams params;
  std::vector<VecX> sc_means;  // per identity
  std::vector<AdamState> adam_shape;   // one per shape-side flat group
  std::vector<AdamState> adam_albedo;  // one per albedo-side flat group
  int cycle = 0;
  int phase = 0;  // 0 = shape next, 1 = albedo next
  std::vector<TraceEntry> trace;

  void save_checkpoint(const std::string& path, const std::string& manifest_extra = "") const;
  static FitState load_checkpoint(const std::string& path, const BlendshapeModel& model);
};

FitState make_initial_state(const FitDataset& dataset, const AlternationSchedule& schedule,
                            int albedo_resolution, int displacement_resolution,
                            Index albedo_rank);

// One phase of the alternation. The frozen side is bit-identical afterwards.
void optimize_shape_phase(FitState& state, const FitDataset& dataset,
                          const AlternationSchedule& schedule,
                          const FeatureExtractor& id_features,
                          const FeatureExtractor& perc_features);
void optimize_albedo_phase(FitState& state, const FitDataset& dataset,
                           const AlternationSchedule& schedule,
                           const FeatureExtractor& id_features,
                           const FeatureExtractor& perc_features);

// Runs the configured cycles, optionally checkpointing between phases and
// resuming from a partially completed state.
void alternate(FitState& state, const FitDataset& dataset, const AlternationSchedule& schedule,
               const std::string& checkpoint_path = "",
               const std::function<void(const TraceEntry&)>& on_step = {});

// Scene assembled from the fitted parameters for one view.
Scene scene_for_view(const FitParams& params, const FitDataset& dataset, Index identity,
                     Index view);

std::uint64_t hash_params(const FitParams& params);

}  // namespace facefit
