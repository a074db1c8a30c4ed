#include "facefit/edit.hpp"

#include <Eigen/Cholesky>

#include <stdexcept>

namespace facefit {

EditDirection fit_edit_direction(Index shape_dim, Index expr_dim, Index attribute_index,
                                 const std::string& label, std::uint64_t seed, int samples,
                                 Real latent_sigma, Real ridge) {
  const Index dim = shape_dim + expr_dim;
  if (attribute_index < 0 || attribute_index >= dim)
    throw std::invalid_argument("fit_edit_direction: attribute index out of range");

  Rng rng(seed);
  MatX x(samples, dim);
  VecX y(samples);
  for (int i = 0; i < samples; ++i) {
    for (Index d = 0; d < dim; ++d) x(i, d) = rng.normal(0.0, latent_sigma);
    y[i] = x(i, attribute_index) > 0 ? 1.0 : -1.0;
  }
  const MatX gram = x.transpose() * x + ridge * MatX::Identity(dim, dim);
  const VecX w = gram.ldlt().solve(x.transpose() * y);

  EditDirection dir;
  dir.direction = w / w.norm();
  dir.label = label;
  return dir;
}

Scene apply_edit(const Scene& scene, const EditDirection& direction, Real alpha) {
  const Index s_dim = scene.s.size(), e_dim = scene.psi.size();
  if (direction.direction.size() != s_dim + e_dim)
    throw std::invalid_argument("apply_edit: direction dimension mismatch");
  Scene out = scene;
  out.s += alpha * direction.direction.head(s_dim);
  out.psi += alpha * direction.direction.tail(e_dim);
  return out;
}

}  // namespace facefit
