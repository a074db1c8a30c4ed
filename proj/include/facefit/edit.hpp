#pragma once

#include "facefit/render.hpp"
#include "facefit/rng.hpp"

#include <string>

namespace facefit {

// Unit direction in the (shape + expression) parameter space, labelled by
// the semantic attribute it separates.
struct EditDirection {
  VecX direction;  // unit norm, length shape_dim + expr_dim
  std::string label;
};

// Fits a ridge-regularized linear separator on synthetic latents labelled by
// the sign of one coefficient, and returns its unit normal. Mirrors the
// boundary-normal construction used for latent-space editing, transplanted
// into the parametric latent.
EditDirection fit_edit_direction(Index shape_dim, Index expr_dim, Index attribute_index,
                                 const std::string& label, std::uint64_t seed,
                                 int samples = 400, Real latent_sigma = 0.3,
                                 Real ridge = 1e-3);

// latent <- latent + alpha * direction; alpha = 0 returns the scene unchanged.
Scene apply_edit(const Scene& scene, const EditDirection& direction, Real alpha);

}  // namespace facefit
