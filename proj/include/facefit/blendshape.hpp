#pragma once

#include "facefit/mesh.hpp"
#include "facefit/types.hpp"

#include <cstdint>
#include <memory>

namespace facefit {

// Linear head model: vertices(s, psi) = template + B_s diag(sigma_s) s
//                                      + B_psi diag(sigma_psi) psi.
// Basis columns are orthonormal; the decaying spectra carry the PCA-like
// ordering so an isotropic penalty on the coefficients acts as a prior.
struct BlendshapeModel {
  VecX template_flat;   // 3N, vertex-major (x0 y0 z0 x1 ...)
  MatX shape_basis;     // 3N x S, orthonormal columns
  MatX expr_basis;      // 3N x E, orthonormal columns
  VecX shape_spectrum;  // S
  VecX expr_spectrum;   // E
  std::shared_ptr<const Topology> topology;

  Index vertex_count() const { return template_flat.size() / 3; }
  Index shape_dim() const { return shape_basis.cols(); }
  Index expr_dim() const { return expr_basis.cols(); }

  MatX3 template_vertices() const;
  Mesh template_mesh() const;
};

Mesh synthesize_coarse(const BlendshapeModel& model, const VecX& s, const VecX& psi);

// Adjoint of synthesize_coarse with respect to the coefficients.
void synthesize_coarse_bwd(const BlendshapeModel& model, const MatX3& dvertices, VecX& ds,
                           VecX& dpsi);

void validate_model(const BlendshapeModel& model);

struct HeadModelParams {
  int subdivisions = 4;  // icosphere level; 4 -> 2562 vertices
  Index shape_dim = 16;
  Index expr_dim = 8;
  std::uint64_t seed = 1234;
};

// Procedural head-like template (deformed icosphere, bilaterally symmetric
// about x = 0) with seeded orthonormal bases and 68 template landmarks.
BlendshapeModel make_head_model(const HeadModelParams& params = {});

// Welded unit icosphere with the same UV chart and winding as the head
// template; handy for analytic-normal oracles.
Mesh make_icosphere(int subdivisions);

}  // namespace facefit
